#pragma once

#include "sadnn/data.hpp"

namespace sadnn {

namespace detail {

inline void fill_noise(Tensor<float>& img, Rng& rng, float lo, float hi) {
    for (std::size_t i = 0; i < img.numel(); ++i) img[i] = float(rng.uniform(lo, hi));
}

inline void draw_circle(Tensor<float>& img, std::size_t h, std::size_t w, double cy,
                        double cx, double r, float intensity) {
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const double dy = double(i) - cy, dx = double(j) - cx;
            if (dy * dy + dx * dx <= r * r) img[i * w + j] = intensity;
        }
}

inline void draw_square(Tensor<float>& img, std::size_t h, std::size_t w, double cy,
                        double cx, double r, float intensity) {
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            if (std::abs(double(i) - cy) <= r && std::abs(double(j) - cx) <= r)
                img[i * w + j] = intensity;
}

inline void draw_cross(Tensor<float>& img, std::size_t h, std::size_t w, double cy,
                       double cx, double r, float intensity) {
    const double bar = std::max(1.0, r / 3.0);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const double dy = std::abs(double(i) - cy), dx = std::abs(double(j) - cx);
            if ((dy <= bar && dx <= r) || (dx <= bar && dy <= r)) img[i * w + j] = intensity;
        }
}

}  // namespace detail

// Multi-label band images: the frame is split into three horizontal bands,
// and each band independently contains a bright shape with probability 1/2
// (circle, square, or cross per band) over a low-amplitude noise floor.
// Labels are multi-hot vectors of length 3, one bit per band.
// Deterministic in (n, seed).
inline Dataset synth_cls_dataset(std::size_t n, std::uint64_t seed, std::size_t h = 32,
                                 std::size_t w = 32) {
    if (h < 16 || w < 16) throw ConfigError("synth_cls_dataset: image too small");
    Rng rng(seed);
    Dataset data;
    data.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        SyntheticSample sample{Tensor<float>({1, h, w}), Tensor<float>({3})};
        detail::fill_noise(sample.image, rng, 0.0f, 0.2f);
        for (std::size_t band = 0; band < 3; ++band) {
            const bool present = rng.uniform() < 0.5;
            const double band_lo = double(band) * double(h) / 3.0;
            const double band_hi = double(band + 1) * double(h) / 3.0;
            const double r_max =
                std::min(4.5, (band_hi - band_lo) / 2.0 - 1.0);
            const double r = rng.uniform(3.0, r_max);
            const double cy = rng.uniform(band_lo + r + 0.5, band_hi - r - 0.5);
            const double cx = rng.uniform(r + 1, double(w) - r - 1);
            const float intensity = float(rng.uniform(0.7, 1.0));
            // draw from a fixed rng budget per band so presence does not
            // shift later samples' streams
            if (present) {
                if (band == 0) detail::draw_circle(sample.image, h, w, cy, cx, r, intensity);
                if (band == 1) detail::draw_square(sample.image, h, w, cy, cx, r, intensity);
                if (band == 2) detail::draw_cross(sample.image, h, w, cy, cx, r, intensity);
            }
            sample.label[band] = present ? 1.0f : 0.0f;
        }
        data.push_back(std::move(sample));
    }
    return data;
}

// Binary segmentation images: one to three axis-aligned elliptical blobs with
// semi-axes in [4.5, 7.5], placed fully inside the frame. The foreground
// fraction lands in [0.05, 0.6] by construction; a redraw guards the bound.
// Deterministic in (n, seed).
inline Dataset synth_seg_dataset(std::size_t n, std::uint64_t seed, std::size_t h = 32,
                                 std::size_t w = 32) {
    if (h < 20 || w < 20) throw ConfigError("synth_seg_dataset: image too small");
    Rng rng(seed);
    Dataset data;
    data.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        SyntheticSample sample{Tensor<float>({1, h, w}), Tensor<float>({1, h, w})};
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 100)
                throw NumericError("synth_seg_dataset: cannot satisfy mask bounds");
            detail::fill_noise(sample.image, rng, 0.0f, 0.2f);
            std::fill(sample.label.data(), sample.label.data() + sample.label.numel(), 0.0f);
            const std::size_t blobs = 1 + rng.uniform_index(3);
            for (std::size_t b = 0; b < blobs; ++b) {
                const double ry = rng.uniform(4.5, 7.5), rx = rng.uniform(4.5, 7.5);
                const double cy = rng.uniform(ry, double(h) - 1 - ry);
                const double cx = rng.uniform(rx, double(w) - 1 - rx);
                const float intensity = float(rng.uniform(0.7, 1.0));
                for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < w; ++j) {
                        const double dy = (double(i) - cy) / ry;
                        const double dx = (double(j) - cx) / rx;
                        if (dy * dy + dx * dx <= 1.0) {
                            sample.image[i * w + j] = intensity;
                            sample.label[i * w + j] = 1.0f;
                        }
                    }
            }
            double frac = 0;
            for (std::size_t i = 0; i < h * w; ++i) frac += sample.label[i];
            frac /= double(h * w);
            if (frac >= 0.05 && frac <= 0.6) break;
        }
        data.push_back(std::move(sample));
    }
    return data;
}

}  // namespace sadnn
