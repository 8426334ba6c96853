#pragma once

#include <cstdint>
#include <limits>
#include <utility>

#include "sadnn/tensor.hpp"

namespace sadnn {

// Flat row-major source index (into the pooled input tensor) of the max
// within each pooling window. Shape mirrors the pooled output.
struct PoolIndices {
    Tensor<std::int64_t> idx;
    Shape4 input_shape;
};

template <class T>
struct PoolResult {
    Tensor<T> y;
    PoolIndices indices;
};

// Window maxima with argmax indices; ties broken by the first index in
// row-major scan order.
template <class T>
PoolResult<T> maxpool2d(const Tensor<T>& x, std::size_t k, std::size_t stride,
                        const std::string& layer_name = "maxpool") {
    const Shape4 s = x.shape4();
    if (k == 0 || stride == 0) throw ConfigError(layer_name + ": zero window or stride");
    if (s.h < k || s.w < k || (s.h - k) % stride != 0 || (s.w - k) % stride != 0)
        throw ShapeError(layer_name + ": spatial dims " + std::to_string(s.h) + "x" +
                         std::to_string(s.w) + " not divisible by window " +
                         std::to_string(k) + " stride " + std::to_string(stride));
    const std::size_t oh = (s.h - k) / stride + 1, ow = (s.w - k) / stride + 1;

    PoolResult<T> r{Tensor<T>({s.n, s.c, oh, ow}),
                    {Tensor<std::int64_t>({s.n, s.c, oh, ow}), s}};
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    std::int64_t best_idx =
                        std::int64_t(((n * s.c + c) * s.h + i * stride) * s.w + j * stride);
                    T best = x[std::size_t(best_idx)];
                    for (std::size_t u = 0; u < k; ++u)
                        for (std::size_t v = 0; v < k; ++v) {
                            const std::size_t si = i * stride + u, sj = j * stride + v;
                            const std::size_t flat =
                                ((n * s.c + c) * s.h + si) * s.w + sj;
                            if (x[flat] > best) {
                                best = x[flat];
                                best_idx = std::int64_t(flat);
                            }
                        }
                    r.y.at4(n, c, i, j) = best;
                    r.indices.idx.at4(n, c, i, j) = best_idx;
                }
    return r;
}

// Scatter pooled values back to their recorded argmax positions; everything
// else is zero.
template <class T>
Tensor<T> maxunpool2d(const Tensor<T>& y, const PoolIndices& indices,
                      const Shape4& out_shape,
                      const std::string& layer_name = "maxunpool") {
    if (y.shape() != indices.idx.shape())
        throw ShapeError(layer_name + ": indices shape does not match input");
    if (!(out_shape == indices.input_shape))
        throw ShapeError(layer_name + ": output shape inconsistent with pooling geometry");
    Tensor<T> out = Tensor<T>::from_shape4(out_shape);
    for (std::size_t i = 0; i < y.numel(); ++i) {
        const std::int64_t t = indices.idx[i];
        if (t < 0 || std::size_t(t) >= out.numel())
            throw NumericError(layer_name + ": pool index out of range (corrupt indices)");
        out[std::size_t(t)] = y[i];
    }
    return out;
}

// route upstream gradient to the argmax positions
template <class T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_y, const PoolIndices& indices) {
    Tensor<T> dx = Tensor<T>::from_shape4(indices.input_shape);
    for (std::size_t i = 0; i < grad_y.numel(); ++i)
        dx[std::size_t(indices.idx[i])] += grad_y[i];
    return dx;
}

// gather: inverse of the unpool scatter
template <class T>
Tensor<T> maxunpool2d_backward(const Tensor<T>& grad_out, const PoolIndices& indices) {
    Tensor<T> dy(indices.idx.shape());
    for (std::size_t i = 0; i < dy.numel(); ++i)
        dy[i] = grad_out[std::size_t(indices.idx[i])];
    return dy;
}

// ---- linear: y = x W^T + b ----

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 OpCounter* counter = nullptr) {
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1)
        throw ShapeError("linear: expected x rank 2, W rank 2, b rank 1");
    const std::size_t n = x.extent(0), d_in = x.extent(1), d_out = w.extent(0);
    if (w.extent(1) != d_in || b.extent(0) != d_out)
        throw ShapeError("linear: dimension mismatch");
    Tensor<T> y({n, d_out});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < d_out; ++o) {
            T acc = b[o];
            for (std::size_t p = 0; p < d_in; ++p)
                acc += x[i * d_in + p] * w[o * d_in + p];
            y[i * d_out + o] = acc;
        }
    if (counter) {
        counter->mul += std::uint64_t(n) * d_out * d_in;
        counter->add += std::uint64_t(n) * d_out * d_in;
    }
    return y;
}

template <class T>
struct LinearGrads {
    Tensor<T> dx, dw, db;
};

template <class T>
LinearGrads<T> linear_backward(const Tensor<T>& x, const Tensor<T>& w,
                               const Tensor<T>& grad_y) {
    const std::size_t n = x.extent(0), d_in = x.extent(1), d_out = w.extent(0);
    LinearGrads<T> g{Tensor<T>({n, d_in}), Tensor<T>({d_out, d_in}), Tensor<T>({d_out})};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < d_out; ++o) {
            const T gy = grad_y[i * d_out + o];
            g.db[o] += gy;
            for (std::size_t p = 0; p < d_in; ++p) {
                g.dw[o * d_in + p] += gy * x[i * d_in + p];
                g.dx[i * d_in + p] += gy * w[o * d_in + p];
            }
        }
    return g;
}

// ---- losses ----

// Mean binary cross-entropy on logits, fused with sigmoid in the stable
// log-sum-exp form: max(z,0) - z*t + log(1 + exp(-|z|)).
template <class T>
T bce_loss(const Tensor<T>& logits, const Tensor<T>& targets) {
    detail::require_same_shape(logits, targets, "bce_loss");
    T total{0};
    for (std::size_t i = 0; i < logits.numel(); ++i) {
        const T t = targets[i];
        if (t != T{0} && t != T{1})
            throw ConfigError("bce_loss: targets must be binary");
        const T z = logits[i];
        total += std::max(z, T{0}) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
    return total / T(logits.numel());
}

template <class T>
Tensor<T> bce_loss_backward(const Tensor<T>& logits, const Tensor<T>& targets) {
    Tensor<T> dz(logits.shape());
    const T inv = T{1} / T(logits.numel());
    for (std::size_t i = 0; i < logits.numel(); ++i) {
        const T sig = T{1} / (T{1} + std::exp(-logits[i]));
        dz[i] = (sig - targets[i]) * inv;
    }
    return dz;
}

inline constexpr double kDiceEps = 1e-5;

// 1 - (2*sum(p*g) + eps) / (sum(p^2) + sum(g^2) + eps), per sample along the
// leading axis, averaged over the batch.
template <class T>
T soft_dice_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    detail::require_same_shape(pred, target, "soft_dice_loss");
    const std::size_t batch = pred.rank() >= 1 ? pred.extent(0) : 1;
    const std::size_t per = pred.numel() / batch;
    T total{0};
    for (std::size_t b = 0; b < batch; ++b) {
        T inter{0}, psq{0}, gsq{0};
        for (std::size_t i = 0; i < per; ++i) {
            const T p = pred[b * per + i], g = target[b * per + i];
            if (p < T{0} || p > T{1})
                throw ConfigError("soft_dice_loss: predictions must lie in [0,1]");
            if (g != T{0} && g != T{1})
                throw ConfigError("soft_dice_loss: targets must be binary");
            inter += p * g;
            psq += p * p;
            gsq += g * g;
        }
        total += T{1} - (T{2} * inter + T(kDiceEps)) / (psq + gsq + T(kDiceEps));
    }
    return total / T(batch);
}

template <class T>
Tensor<T> soft_dice_loss_backward(const Tensor<T>& pred, const Tensor<T>& target) {
    const std::size_t batch = pred.extent(0);
    const std::size_t per = pred.numel() / batch;
    Tensor<T> dp(pred.shape());
    for (std::size_t b = 0; b < batch; ++b) {
        T inter{0}, psq{0}, gsq{0};
        for (std::size_t i = 0; i < per; ++i) {
            const T p = pred[b * per + i], g = target[b * per + i];
            inter += p * g;
            psq += p * p;
            gsq += g * g;
        }
        const T a = T{2} * inter + T(kDiceEps);
        const T d = psq + gsq + T(kDiceEps);
        for (std::size_t i = 0; i < per; ++i) {
            const T p = pred[b * per + i], g = target[b * per + i];
            // d/dp of (1 - a/d) = (2*p*a - 2*g*d) / d^2
            dp[b * per + i] = (T{2} * p * a - T{2} * g * d) / (d * d) / T(batch);
        }
    }
    return dp;
}

}  // namespace sadnn
