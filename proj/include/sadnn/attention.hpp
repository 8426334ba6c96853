#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sadnn/tensor.hpp"

namespace sadnn {

enum class PadMode {
    zero,  // out-of-bounds neighbors contribute zero activations
    wrap   // circular indexing; test-only mode for shift-invariance checks
};

struct AttentionSpec {
    std::size_t c_in = 1;
    std::size_t c_out = 2;
    std::size_t window_h = 3;
    std::size_t window_w = 3;
    PadMode padding = PadMode::zero;

    void validate() const {
        if (window_h % 2 == 0 || window_w % 2 == 0)
            throw ConfigError("attention: window extents must be odd");
        if (c_in == 0 || c_out == 0)
            throw ConfigError("attention: channel counts must be positive");
    }
};

template <class T>
struct AttentionWeights {
    Tensor<T> w_q;    // c_out x c_in
    Tensor<T> w_k;    // c_out x c_in
    Tensor<T> w_v;    // c_out x c_in
    // The key channel halves: the lower floor(c_out/2) channels carry the
    // column-offset embedding, the remaining ceil(c_out/2) the row-offset one.
    Tensor<T> e_row;  // (c_out - c_out/2) x window_h
    Tensor<T> e_col;  // (c_out/2) x window_w

    static AttentionWeights zeros(const AttentionSpec& s) {
        AttentionWeights w;
        w.w_q = Tensor<T>({s.c_out, s.c_in});
        w.w_k = Tensor<T>({s.c_out, s.c_in});
        w.w_v = Tensor<T>({s.c_out, s.c_in});
        w.e_row = Tensor<T>({s.c_out - s.c_out / 2, s.window_h});
        w.e_col = Tensor<T>({s.c_out / 2, s.window_w});
        return w;
    }

    static AttentionWeights init(const AttentionSpec& s, Rng& rng) {
        AttentionWeights w = zeros(s);
        const T wb = T(1) / std::sqrt(T(s.c_in));
        for (auto* m : {&w.w_q, &w.w_k, &w.w_v})
            for (std::size_t i = 0; i < m->numel(); ++i)
                (*m)[i] = T(rng.uniform(-double(wb), double(wb)));
        const T eb = T(1) / std::sqrt(T(std::max<std::size_t>(1, s.c_out / 2)));
        for (auto* m : {&w.e_row, &w.e_col})
            for (std::size_t i = 0; i < m->numel(); ++i)
                (*m)[i] = T(rng.uniform(-double(eb), double(eb)));
        return w;
    }
};

inline std::size_t attention_param_count(const AttentionSpec& s) {
    return 3 * s.c_out * s.c_in + (s.c_out / 2) * s.window_w +
           (s.c_out - s.c_out / 2) * s.window_h;
}

struct AttentionOpCount {
    std::uint64_t mul_per_pixel = 0;
    std::uint64_t add_per_pixel = 0;
    std::uint64_t mul_total = 0;
    std::uint64_t add_total = 0;
};

// Ops_mul = Ops_add = 2*b^2*c per output pixel, with c the output channel
// count and b^2 generalized to window_h*window_w for non-square windows.
inline AttentionOpCount attention_op_count(const AttentionSpec& s, std::size_t out_h,
                                           std::size_t out_w) {
    AttentionOpCount oc;
    oc.mul_per_pixel = 2ull * s.window_h * s.window_w * s.c_out;
    oc.add_per_pixel = oc.mul_per_pixel;
    oc.mul_total = oc.mul_per_pixel * out_h * out_w;
    oc.add_total = oc.add_per_pixel * out_h * out_w;
    return oc;
}

// Extract the local window around every pixel: N x H x W x C x wh x ww.
// Out-of-bounds neighbors are zero-filled (or wrapped in wrap mode).
template <class T>
Tensor<T> extract_local_regions(const Tensor<T>& x, const AttentionSpec& spec) {
    spec.validate();
    const Shape4 s = x.shape4();
    if (s.c != spec.c_in)
        throw ShapeError("extract_local_regions: channel mismatch, got " +
                         std::to_string(s.c) + " expected " + std::to_string(spec.c_in));
    const std::size_t wh = spec.window_h, ww = spec.window_w;
    const long ch_off = long(wh / 2), cw_off = long(ww / 2);
    Tensor<T> out({s.n, s.h, s.w, s.c, wh, ww});
    std::size_t idx = 0;
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t i = 0; i < s.h; ++i)
            for (std::size_t j = 0; j < s.w; ++j)
                for (std::size_t c = 0; c < s.c; ++c)
                    for (std::size_t u = 0; u < wh; ++u)
                        for (std::size_t v = 0; v < ww; ++v, ++idx) {
                            long si = long(i) + long(u) - ch_off;
                            long sj = long(j) + long(v) - cw_off;
                            if (spec.padding == PadMode::wrap) {
                                si = (si % long(s.h) + long(s.h)) % long(s.h);
                                sj = (sj % long(s.w) + long(s.w)) % long(s.w);
                            }
                            if (si < 0 || si >= long(s.h) || sj < 0 || sj >= long(s.w))
                                out[idx] = T{0};
                            else
                                out[idx] = x.at4(n, c, std::size_t(si), std::size_t(sj));
                        }
    return out;
}

// Keys laid out as N x H x W x c_out x wh x ww. The first channel half
// receives the column-offset embedding, the second half the row-offset
// embedding; halves stay in their original channel order.
template <class T>
Tensor<T> add_relative_embedding(const Tensor<T>& keys, const Tensor<T>& e_row,
                                 const Tensor<T>& e_col) {
    if (keys.rank() != 6) throw ShapeError("add_relative_embedding: expected rank-6 keys");
    const auto& ks = keys.shape();
    const std::size_t c = ks[3], wh = ks[4], ww = ks[5];
    const std::size_t half = c / 2;
    if (e_row.shape() != std::vector<std::size_t>{c - half, wh} ||
        e_col.shape() != std::vector<std::size_t>{half, ww})
        throw ShapeError("add_relative_embedding: embedding table dimension mismatch");

    Tensor<T> out = keys;
    const std::size_t pixels = ks[0] * ks[1] * ks[2];
    for (std::size_t p = 0; p < pixels; ++p)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t u = 0; u < wh; ++u)
                for (std::size_t v = 0; v < ww; ++v) {
                    T e = ch < half ? e_col[ch * ww + v] : e_row[(ch - half) * wh + u];
                    out[((p * c + ch) * wh + u) * ww + v] += e;
                }
    return out;
}

// Forward intermediates kept for the backward pass.
template <class T>
struct AttentionCache {
    Tensor<T> q;      // N x c_out x H x W
    Tensor<T> k;      // N x c_out x H x W (pre-embedding projections)
    Tensor<T> v;      // N x c_out x H x W
    Tensor<T> probs;  // N x H x W x (wh*ww)
};

namespace detail {

// project x (N x c_in x H x W) through W (c_out x c_in) -> N x c_out x H x W
template <class T>
Tensor<T> project_pixels(const Tensor<T>& x, const Tensor<T>& w) {
    const Shape4 s = x.shape4();
    const std::size_t c_out = w.extent(0), c_in = w.extent(1);
    Tensor<T> out({s.n, c_out, s.h, s.w});
    const std::size_t hw = s.h * s.w;
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t co = 0; co < c_out; ++co)
            for (std::size_t ci = 0; ci < c_in; ++ci) {
                const T wv = w[co * c_in + ci];
                const T* src = x.data() + (n * c_in + ci) * hw;
                T* dst = out.data() + (n * c_out + co) * hw;
                for (std::size_t p = 0; p < hw; ++p) dst[p] += wv * src[p];
            }
    return out;
}

}  // namespace detail

// Per-pixel local attention: query from the center pixel, keys/values from
// the window, relative positional embedding added to keys, softmax over the
// window, weighted sum of values. Spatial dims preserved.
template <class T>
Tensor<T> attention_forward(const Tensor<T>& x, const AttentionSpec& spec,
                            const AttentionWeights<T>& w,
                            AttentionCache<T>* cache = nullptr,
                            OpCounter* counter = nullptr,
                            const std::string& layer_name = "attention") {
    spec.validate();
    const Shape4 s = x.shape4();
    if (s.c != spec.c_in)
        throw ShapeError(layer_name + ": input channel mismatch, got " +
                         std::to_string(s.c) + " expected " + std::to_string(spec.c_in));

    const std::size_t c = spec.c_out, half = c / 2;
    const std::size_t wh = spec.window_h, ww = spec.window_w, win = wh * ww;
    const long ch_off = long(wh / 2), cw_off = long(ww / 2);

    Tensor<T> q = detail::project_pixels(x, w.w_q);
    Tensor<T> k = detail::project_pixels(x, w.w_k);
    Tensor<T> v = detail::project_pixels(x, w.w_v);

    Tensor<T> y({s.n, c, s.h, s.w});
    Tensor<T> probs({s.n, s.h, s.w, win});
    std::vector<T> logits(win), kprime(win * c);
    const std::size_t hw = s.h * s.w;

    for (std::size_t n = 0; n < s.n; ++n) {
        const T* qn = q.data() + n * c * hw;
        const T* kn = k.data() + n * c * hw;
        const T* vn = v.data() + n * c * hw;
        for (std::size_t i = 0; i < s.h; ++i)
            for (std::size_t j = 0; j < s.w; ++j) {
                const std::size_t pix = i * s.w + j;
                // assemble embedded keys for the window; padded positions keep
                // only the embedding (projected zero activation)
                for (std::size_t u = 0; u < wh; ++u)
                    for (std::size_t v2 = 0; v2 < ww; ++v2) {
                        long si = long(i) + long(u) - ch_off;
                        long sj = long(j) + long(v2) - cw_off;
                        if (spec.padding == PadMode::wrap) {
                            si = (si % long(s.h) + long(s.h)) % long(s.h);
                            sj = (sj % long(s.w) + long(s.w)) % long(s.w);
                        }
                        const bool inb = si >= 0 && si < long(s.h) && sj >= 0 && sj < long(s.w);
                        const std::size_t off = u * ww + v2;
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            T e = ch < half ? w.e_col[ch * ww + v2]
                                            : w.e_row[(ch - half) * wh + u];
                            T kv = inb ? kn[ch * hw + std::size_t(si) * s.w + std::size_t(sj)]
                                       : T{0};
                            kprime[off * c + ch] = kv + e;
                        }
                    }
                // logits: q . k' per window position
                T mx = -std::numeric_limits<T>::infinity();
                for (std::size_t off = 0; off < win; ++off) {
                    T acc{0};
                    for (std::size_t ch = 0; ch < c; ++ch)
                        acc += qn[ch * hw + pix] * kprime[off * c + ch];
                    logits[off] = acc;
                    mx = std::max(mx, acc);
                }
                if (counter) {
                    counter->mul += win * c;
                    counter->add += win * c;
                }
                // softmax over the window
                T sum{0};
                T* pr = probs.data() + ((n * s.h + i) * s.w + j) * win;
                for (std::size_t off = 0; off < win; ++off) {
                    pr[off] = std::exp(logits[off] - mx);
                    sum += pr[off];
                }
                for (std::size_t off = 0; off < win; ++off) pr[off] /= sum;
                // aggregate values (padded positions contribute zero values)
                for (std::size_t u = 0; u < wh; ++u)
                    for (std::size_t v2 = 0; v2 < ww; ++v2) {
                        long si = long(i) + long(u) - ch_off;
                        long sj = long(j) + long(v2) - cw_off;
                        if (spec.padding == PadMode::wrap) {
                            si = (si % long(s.h) + long(s.h)) % long(s.h);
                            sj = (sj % long(s.w) + long(s.w)) % long(s.w);
                        }
                        const bool inb = si >= 0 && si < long(s.h) && sj >= 0 && sj < long(s.w);
                        const T a = pr[u * ww + v2];
                        if (inb) {
                            const std::size_t sp = std::size_t(si) * s.w + std::size_t(sj);
                            for (std::size_t ch = 0; ch < c; ++ch)
                                y.at4(n, ch, i, j) += a * vn[ch * hw + sp];
                        }
                    }
                if (counter) {
                    counter->mul += win * c;
                    counter->add += win * c;
                }
            }
    }
    if (!all_finite(y))
        throw NumericError(layer_name + ": non-finite value in attention output");
    if (cache) {
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->probs = std::move(probs);
    }
    return y;
}

template <class T>
struct AttentionGrads {
    Tensor<T> dx;
    Tensor<T> dw_q, dw_k, dw_v;
    Tensor<T> de_row, de_col;
};

template <class T>
AttentionGrads<T> attention_backward(const Tensor<T>& x, const AttentionSpec& spec,
                                     const AttentionWeights<T>& w,
                                     const AttentionCache<T>& cache,
                                     const Tensor<T>& grad_y) {
    const Shape4 s = x.shape4();
    const std::size_t c = spec.c_out, half = c / 2;
    const std::size_t wh = spec.window_h, ww = spec.window_w, win = wh * ww;
    const long ch_off = long(wh / 2), cw_off = long(ww / 2);
    const std::size_t hw = s.h * s.w;

    AttentionGrads<T> g;
    g.dw_q = Tensor<T>({c, spec.c_in});
    g.dw_k = Tensor<T>({c, spec.c_in});
    g.dw_v = Tensor<T>({c, spec.c_in});
    g.de_row = Tensor<T>({c - half, wh});
    g.de_col = Tensor<T>({half, ww});

    // gradients w.r.t. the per-pixel projections, reduced to weight/input
    // grads at the end
    Tensor<T> dq({s.n, c, s.h, s.w});
    Tensor<T> dk({s.n, c, s.h, s.w});
    Tensor<T> dv({s.n, c, s.h, s.w});

    std::vector<T> da(win), dl(win), dkp(c);

    for (std::size_t n = 0; n < s.n; ++n) {
        const T* qn = cache.q.data() + n * c * hw;
        const T* kn = cache.k.data() + n * c * hw;
        const T* vn = cache.v.data() + n * c * hw;
        for (std::size_t i = 0; i < s.h; ++i)
            for (std::size_t j = 0; j < s.w; ++j) {
                const std::size_t pix = i * s.w + j;
                const T* pr = cache.probs.data() + ((n * s.h + i) * s.w + j) * win;

                // d(probs): upstream dotted with values; padded values are zero
                T dot{0};
                for (std::size_t u = 0; u < wh; ++u)
                    for (std::size_t v2 = 0; v2 < ww; ++v2) {
                        long si = long(i) + long(u) - ch_off;
                        long sj = long(j) + long(v2) - cw_off;
                        if (spec.padding == PadMode::wrap) {
                            si = (si % long(s.h) + long(s.h)) % long(s.h);
                            sj = (sj % long(s.w) + long(s.w)) % long(s.w);
                        }
                        const bool inb = si >= 0 && si < long(s.h) && sj >= 0 && sj < long(s.w);
                        const std::size_t off = u * ww + v2;
                        T acc{0};
                        if (inb) {
                            const std::size_t sp = std::size_t(si) * s.w + std::size_t(sj);
                            for (std::size_t ch = 0; ch < c; ++ch) {
                                const T gy = grad_y.at4(n, ch, i, j);
                                acc += gy * vn[ch * hw + sp];
                                dv[(n * c + ch) * hw + sp] += pr[off] * gy;
                            }
                        }
                        da[off] = acc;
                        dot += pr[off] * acc;
                    }
                // softmax backward
                for (std::size_t off = 0; off < win; ++off)
                    dl[off] = pr[off] * (da[off] - dot);

                // through logits into q and embedded keys
                for (std::size_t u = 0; u < wh; ++u)
                    for (std::size_t v2 = 0; v2 < ww; ++v2) {
                        long si = long(i) + long(u) - ch_off;
                        long sj = long(j) + long(v2) - cw_off;
                        if (spec.padding == PadMode::wrap) {
                            si = (si % long(s.h) + long(s.h)) % long(s.h);
                            sj = (sj % long(s.w) + long(s.w)) % long(s.w);
                        }
                        const bool inb = si >= 0 && si < long(s.h) && sj >= 0 && sj < long(s.w);
                        const std::size_t off = u * ww + v2;
                        const T dloff = dl[off];
                        const std::size_t sp =
                            inb ? std::size_t(si) * s.w + std::size_t(sj) : 0;
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            T e = ch < half ? w.e_col[ch * ww + v2]
                                            : w.e_row[(ch - half) * wh + u];
                            T kv = inb ? kn[ch * hw + sp] : T{0};
                            dq[(n * c + ch) * hw + pix] += dloff * (kv + e);
                            dkp[ch] = dloff * qn[ch * hw + pix];
                        }
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            if (ch < half)
                                g.de_col[ch * ww + v2] += dkp[ch];
                            else
                                g.de_row[(ch - half) * wh + u] += dkp[ch];
                            if (inb) dk[(n * c + ch) * hw + sp] += dkp[ch];
                        }
                    }
            }
    }

    // reduce projection grads: dW = d(proj) . x^T per pixel, dx = W^T d(proj)
    g.dx = Tensor<T>({s.n, s.c, s.h, s.w});
    auto reduce = [&](const Tensor<T>& dproj, const Tensor<T>& wmat, Tensor<T>& dw) {
        for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t co = 0; co < c; ++co) {
                const T* dp = dproj.data() + (n * c + co) * hw;
                for (std::size_t ci = 0; ci < s.c; ++ci) {
                    const T* xp = x.data() + (n * s.c + ci) * hw;
                    T* gx = g.dx.data() + (n * s.c + ci) * hw;
                    const T wv = wmat[co * s.c + ci];
                    T acc{0};
                    for (std::size_t p = 0; p < hw; ++p) {
                        acc += dp[p] * xp[p];
                        gx[p] += wv * dp[p];
                    }
                    dw[co * s.c + ci] += acc;
                }
            }
    };
    reduce(dq, w.w_q, g.dw_q);
    reduce(dk, w.w_k, g.dw_k);
    reduce(dv, w.w_v, g.dw_v);
    return g;
}

}  // namespace sadnn
