#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "sadnn/common.hpp"

namespace sadnn {

// Dense n-dimensional array, flat row-major storage. Immutable by convention:
// ops return new tensors, in-place mutation is reserved for construction and
// optimizer updates.
template <class T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, T fill = T{})
        : shape_(std::move(shape)), data_(numel_of(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (numel_of(shape_) != data_.size())
            throw ShapeError("tensor: data length does not match shape");
    }

    static Tensor from_shape4(const Shape4& s, T fill = T{}) {
        return Tensor({s.n, s.c, s.h, s.w}, fill);
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // NCHW accessors
    T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    const T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    T& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    Shape4 shape4() const {
        if (rank() != 4) throw ShapeError("tensor: expected rank 4");
        return Shape4{shape_[0], shape_[1], shape_[2], shape_[3]};
    }

    Tensor reshaped(std::vector<std::size_t> new_shape) const {
        if (numel_of(new_shape) != numel())
            throw ShapeError("reshape: element count mismatch");
        Tensor out = *this;
        out.shape_ = std::move(new_shape);
        return out;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               std::multiplies<>());
    }

    static std::string shape_str(const std::vector<std::size_t>& shape) {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << ']';
        return os.str();
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

namespace detail {
template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " +
                         Tensor<T>::shape_str(a.shape()) + " vs " +
                         Tensor<T>::shape_str(b.shape()));
}
}  // namespace detail

// ---- elementwise ops (scalar broadcast only) ----

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "add");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
    return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "sub");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
    return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "mul");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
    return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * s;
    return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] > T{0} ? a[i] : T{0};
    return out;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = T{1} / (T{1} + std::exp(-a[i]));
    return out;
}

// ---- matmul ----

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: operands must be rank 2");
    if (a.extent(1) != b.extent(0))
        throw ShapeError("matmul: inner dimension mismatch " +
                         Tensor<T>::shape_str(a.shape()) + " vs " +
                         Tensor<T>::shape_str(b.shape()));
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor<T> out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = a[i * k + p];
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * b[p * n + j];
        }
    return out;
}

// ---- softmax (max-subtracted) ----

template <class T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
    if (axis >= x.rank()) throw ShapeError("softmax: axis out of bounds");
    const auto& shape = x.shape();
    std::size_t axis_len = shape[axis];
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    std::size_t outer = x.numel() / (axis_len * inner);

    Tensor<T> out(shape);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * axis_len * inner + in;
            T mx = x[base];
            for (std::size_t k = 1; k < axis_len; ++k)
                mx = std::max(mx, x[base + k * inner]);
            T sum{0};
            for (std::size_t k = 0; k < axis_len; ++k) {
                T e = std::exp(x[base + k * inner] - mx);
                out[base + k * inner] = e;
                sum += e;
            }
            for (std::size_t k = 0; k < axis_len; ++k) out[base + k * inner] /= sum;
        }
    return out;
}

// ---- concat / slice ----

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
    if (xs.empty()) throw ShapeError("concat: empty input list");
    const auto& s0 = xs[0].shape();
    if (axis >= s0.size()) throw ShapeError("concat: axis out of bounds");
    std::size_t total_axis = 0;
    for (const auto& x : xs) {
        if (x.rank() != s0.size()) throw ShapeError("concat: rank mismatch");
        for (std::size_t d = 0; d < s0.size(); ++d)
            if (d != axis && x.shape()[d] != s0[d])
                throw ShapeError("concat: incompatible shapes off-axis");
        total_axis += x.shape()[axis];
    }
    auto out_shape = s0;
    out_shape[axis] = total_axis;
    Tensor<T> out(out_shape);

    std::size_t inner = 1;
    for (std::size_t d = axis + 1; d < s0.size(); ++d) inner *= s0[d];
    std::size_t outer = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= s0[d];

    std::size_t axis_off = 0;
    for (const auto& x : xs) {
        const std::size_t ax = x.shape()[axis];
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(x.data() + o * ax * inner, ax * inner,
                        out.data() + (o * total_axis + axis_off) * inner);
        axis_off += ax;
    }
    return out;
}

// slice along `axis`, half-open [begin, end)
template <class T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
    if (axis >= x.rank()) throw ShapeError("slice: axis out of bounds");
    if (begin > end || end > x.shape()[axis]) throw ShapeError("slice: range out of bounds");
    auto out_shape = x.shape();
    out_shape[axis] = end - begin;
    Tensor<T> out(out_shape);

    std::size_t inner = 1;
    for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape()[d];
    std::size_t outer = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
    const std::size_t ax = x.shape()[axis];

    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(x.data() + (o * ax + begin) * inner, (end - begin) * inner,
                    out.data() + o * (end - begin) * inner);
    return out;
}

template <class T>
bool all_finite(const Tensor<T>& x) {
    for (std::size_t i = 0; i < x.numel(); ++i)
        if (!std::isfinite(double(x[i]))) return false;
    return true;
}

}  // namespace sadnn
