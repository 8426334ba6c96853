#pragma once

#include <vector>

#include "sadnn/tensor.hpp"

namespace sadnn {

// One toy-task example: image in [0,1], label either a multi-hot vector
// (classification) or a binary mask (segmentation).
struct SyntheticSample {
    Tensor<float> image;  // c x h x w
    Tensor<float> label;  // num_labels (cls) or 1 x h x w (seg)
};

using Dataset = std::vector<SyntheticSample>;

// Stack per-sample images into one N x C x H x W batch.
inline Tensor<float> stack_images(const Dataset& data, std::size_t begin, std::size_t end) {
    if (begin >= end || end > data.size()) throw ShapeError("stack_images: bad range");
    const auto& s = data[begin].image.shape();
    Tensor<float> out({end - begin, s[0], s[1], s[2]});
    const std::size_t per = data[begin].image.numel();
    for (std::size_t i = begin; i < end; ++i)
        std::copy_n(data[i].image.data(), per, out.data() + (i - begin) * per);
    return out;
}

}  // namespace sadnn
