#pragma once

#include <cfenv>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sadnn/graph.hpp"

namespace sadnn {

// Affine mapping r = S * (q - Z). Weights use the symmetric convention
// (Z = 0), activations the asymmetric one; both live in signed int8.
struct QuantParams {
    double scale = 1.0;
    int zero_point = 0;

    bool operator==(const QuantParams&) const = default;
};

inline std::int8_t saturate_i8(long long v) {
    return std::int8_t(std::max(-128ll, std::min(127ll, v)));
}

// round-half-even; relies on the default FE_TONEAREST rounding mode
inline long long llround_even(double x) { return (long long)std::nearbyint(x); }

inline std::int8_t quantize_value(double r, const QuantParams& qp) {
    return saturate_i8(qp.zero_point + llround_even(r / qp.scale));
}

inline double dequantize_value(std::int8_t q, const QuantParams& qp) {
    return qp.scale * (int(q) - qp.zero_point);
}

// Activation qparams from an observed range; the range is widened to include
// zero so that Z always represents real 0 exactly.
inline QuantParams compute_qparams(double mn, double mx) {
    if (!std::isfinite(mn) || !std::isfinite(mx) || mn > mx)
        throw NumericError("compute_qparams: invalid range");
    mn = std::min(mn, 0.0);
    mx = std::max(mx, 0.0);
    if (mn == 0.0 && mx == 0.0) return QuantParams{1.0, 0};
    QuantParams qp;
    qp.scale = (mx - mn) / 255.0;
    long long z = llround_even(-mn / qp.scale) - 128;
    qp.zero_point = int(std::max(-128ll, std::min(127ll, z)));
    return qp;
}

// Weight qparams: symmetric, Z = 0.
inline QuantParams compute_qparams_symmetric(double max_abs) {
    if (!std::isfinite(max_abs)) throw NumericError("compute_qparams: non-finite range");
    return QuantParams{max_abs > 0 ? max_abs / 127.0 : 1.0, 0};
}

struct QuantizedTensor {
    Tensor<std::int8_t> data;
    QuantParams qp;

    const std::vector<std::size_t>& shape() const { return data.shape(); }
    std::size_t numel() const { return data.numel(); }
};

template <class T>
QuantizedTensor quantize_tensor(const Tensor<T>& t, const QuantParams& qp) {
    QuantizedTensor out{Tensor<std::int8_t>(t.shape()), qp};
    for (std::size_t i = 0; i < t.numel(); ++i)
        out.data[i] = quantize_value(double(t[i]), qp);
    return out;
}

inline QuantizedTensor quantize_tensor_symmetric(const Tensor<float>& t) {
    double ma = 0;
    for (std::size_t i = 0; i < t.numel(); ++i) ma = std::max(ma, std::abs(double(t[i])));
    return quantize_tensor(t, compute_qparams_symmetric(ma));
}

inline Tensor<float> dequantize(const QuantizedTensor& qt) {
    Tensor<float> out(qt.data.shape());
    for (std::size_t i = 0; i < qt.numel(); ++i)
        out[i] = float(dequantize_value(qt.data[i], qt.qp));
    return out;
}

namespace detail {
// int32 accumulator guard; overflow would silently corrupt requantization
inline std::int32_t check_acc(long long acc, const char* where) {
    if (acc > std::numeric_limits<std::int32_t>::max() ||
        acc < std::numeric_limits<std::int32_t>::min())
        throw NumericError(std::string(where) + ": int32 accumulator overflow");
    return std::int32_t(acc);
}

inline std::int8_t requant(long long acc, double multiplier, int z_out) {
    return saturate_i8(z_out + llround_even(double(acc) * multiplier));
}
}  // namespace detail

// Integer matmul: int32 accumulation of (a - Z_a)(b - Z_b) + bias, then
// requantization to out_qp with the real-valued multiplier S_a*S_b/S_out.
// bias must be pre-quantized with scale S_a*S_b and zero-point 0.
inline QuantizedTensor quantized_matmul(const QuantizedTensor& a, const QuantizedTensor& b,
                                        const Tensor<std::int32_t>& bias,
                                        const QuantParams& out_qp) {
    if (a.data.rank() != 2 || b.data.rank() != 2 || a.data.extent(1) != b.data.extent(0))
        throw ShapeError("quantized_matmul: dimension mismatch");
    const std::size_t m = a.data.extent(0), k = a.data.extent(1), n = b.data.extent(1);
    if (bias.numel() != 0 && bias.numel() != n)
        throw ShapeError("quantized_matmul: bias length mismatch");
    const double mult = a.qp.scale * b.qp.scale / out_qp.scale;
    QuantizedTensor out{Tensor<std::int8_t>({m, n}), out_qp};
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            long long acc = bias.numel() ? bias[j] : 0;
            for (std::size_t p = 0; p < k; ++p)
                acc += (int(a.data[i * k + p]) - a.qp.zero_point) *
                       (int(b.data[p * n + j]) - b.qp.zero_point);
            detail::check_acc(acc, "quantized_matmul");
            out.data[i * n + j] = detail::requant(acc, mult, out_qp.zero_point);
        }
    return out;
}

// ---- calibration ----

struct CalibrationStats {
    std::map<std::string, std::pair<float, float>> minmax;

    void observe(const std::string& site, const Tensor<float>& t) {
        auto [it, fresh] = minmax.try_emplace(
            site, std::pair<float, float>{std::numeric_limits<float>::max(),
                                          std::numeric_limits<float>::lowest()});
        for (std::size_t i = 0; i < t.numel(); ++i) {
            it->second.first = std::min(it->second.first, t[i]);
            it->second.second = std::max(it->second.second, t[i]);
        }
    }

    QuantParams site_qparams(const std::string& site) const {
        auto it = minmax.find(site);
        if (it == minmax.end())
            throw ConfigError("quantize: no calibration stats for site '" + site + "'");
        return compute_qparams(it->second.first, it->second.second);
    }

    bool covers(const std::string& site, const Tensor<float>& t, double slack = 0.0) const {
        auto it = minmax.find(site);
        if (it == minmax.end()) return false;
        for (std::size_t i = 0; i < t.numel(); ++i)
            if (t[i] < it->second.first - slack || t[i] > it->second.second + slack)
                return false;
        return true;
    }
};

namespace detail {
// Observe an attention node's internal activation sites (query, embedded key,
// value projections) on a calibration batch.
inline void observe_attention_sites(CalibrationStats& stats, const std::string& prefix,
                                    const Tensor<float>& x, const AttentionSpec& spec,
                                    const AttentionWeights<float>& w) {
    Tensor<float> q = project_pixels(x, w.w_q);
    Tensor<float> k = project_pixels(x, w.w_k);
    Tensor<float> v = project_pixels(x, w.w_v);
    stats.observe(prefix + ".q", q);
    stats.observe(prefix + ".v", v);
    AttentionSpec gather = spec;
    gather.c_in = spec.c_out;
    Tensor<float> kwin = extract_local_regions(k, gather);
    stats.observe(prefix + ".k", add_relative_embedding(kwin, w.e_row, w.e_col));
}
}  // namespace detail

// Min/max observers over a calibration set: the network input, every node
// output, and the attention-internal sites.
inline CalibrationStats calibrate(const NetworkGraph& g,
                                  const std::vector<Tensor<float>>& batches) {
    if (batches.empty()) throw ConfigError("calibrate: empty calibration data");
    CalibrationStats stats;
    for (const auto& batch : batches) {
        stats.observe("input", batch);
        auto ex = run_forward(g, batch);
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            const LayerNode& node = g.nodes[i];
            stats.observe("node:" + node.name, ex.tape.value(ex.node_out[i]));
            if (node.kind == LayerKind::attention) {
                AttentionWeights<float> w;
                w.w_q = g.param(node.name + ".w_q");
                w.w_k = g.param(node.name + ".w_k");
                w.w_v = g.param(node.name + ".w_v");
                w.e_row = g.param(node.name + ".e_row");
                w.e_col = g.param(node.name + ".e_col");
                detail::observe_attention_sites(
                    stats, "node:" + node.name,
                    ex.tape.value(ex.node_out[std::size_t(node.inputs[0])]), node.att, w);
            }
        }
    }
    return stats;
}

// ---- quantized network ----

struct QuantizedNetwork {
    ModelConfig cfg;
    std::vector<LayerNode> nodes;
    int output = -1;
    QuantParams input_qp;
    std::map<std::string, QuantizedTensor> weights;       // int8 weight tensors
    std::map<std::string, Tensor<std::int32_t>> biases;   // scale S_in*S_w, Z=0
    std::map<std::string, QuantParams> sites;             // activation sites

    const QuantizedTensor& weight(const std::string& name) const {
        auto it = weights.find(name);
        if (it == weights.end()) throw ConfigError("qnet: missing weight " + name);
        return it->second;
    }
    QuantParams site(const std::string& name) const {
        auto it = sites.find(name);
        if (it == sites.end()) throw ConfigError("qnet: missing site qparams " + name);
        return it->second;
    }
};

// Post-training quantization: all weight tensors to symmetric int8, all
// activation sites to asymmetric int8 from calibration ranges, biases to
// int32 at the combined input*weight scale.
inline QuantizedNetwork quantize_network(const NetworkGraph& g,
                                         const CalibrationStats& stats) {
    QuantizedNetwork q;
    q.cfg = g.cfg;
    q.nodes = g.nodes;
    q.output = g.output;
    q.input_qp = stats.site_qparams("input");
    q.sites["input"] = q.input_qp;

    // input site of each node = output site of its first producer
    auto producer_site = [&](const LayerNode& node) -> std::string {
        if (g.nodes[std::size_t(node.inputs.at(0))].kind == LayerKind::input) return "input";
        return "node:" + g.nodes[std::size_t(node.inputs.at(0))].name;
    };

    for (const auto& node : g.nodes) {
        const std::string site = "node:" + node.name;
        switch (node.kind) {
            case LayerKind::attention: {
                for (const char* p : {".w_q", ".w_k", ".w_v", ".e_row", ".e_col"})
                    q.weights[node.name + p] =
                        quantize_tensor_symmetric(g.param(node.name + p));
                for (const char* p : {".q", ".k", ".v"})
                    q.sites[site + p] = stats.site_qparams(site + p);
                q.sites[site] = stats.site_qparams(site);
                break;
            }
            case LayerKind::linear:
            case LayerKind::conv1x1: {
                auto w = quantize_tensor_symmetric(g.param(node.name + ".w"));
                const QuantParams in_qp = q.site(producer_site(node));
                const double bscale = in_qp.scale * w.qp.scale;
                const Tensor<float>& bf = g.param(node.name + ".b");
                Tensor<std::int32_t> bq(bf.shape());
                for (std::size_t i = 0; i < bf.numel(); ++i)
                    bq[i] = std::int32_t(llround_even(double(bf[i]) / bscale));
                q.weights[node.name + ".w"] = std::move(w);
                q.biases[node.name + ".b"] = std::move(bq);
                q.sites[site] = stats.site_qparams(site);
                break;
            }
            case LayerKind::concat:
            case LayerKind::sigmoid:
                q.sites[site] = stats.site_qparams(site);
                break;
            case LayerKind::input:
            case LayerKind::relu:
            case LayerKind::maxpool:
            case LayerKind::maxunpool:
            case LayerKind::flatten:
                // carry their producer's qparams
                if (node.kind != LayerKind::input)
                    q.sites[site] = q.site(producer_site(node));
                break;
        }
    }
    return q;
}

namespace detail {

// fixed softmax-probability site: [0,1] at full int8 resolution
inline QuantParams prob_qparams() { return QuantParams{1.0 / 255.0, -128}; }

struct QActivation {
    Tensor<std::int8_t> q;
    QuantParams qp;
};

// int8 per-pixel projection accumulators: acc[co][pix] at scale S_x * S_w
inline std::vector<std::int32_t> project_acc(const Tensor<std::int8_t>& x,
                                             const QuantParams& x_qp,
                                             const QuantizedTensor& w, std::size_t n,
                                             std::size_t hw, const char* where) {
    const std::size_t c_out = w.data.extent(0), c_in = w.data.extent(1);
    std::vector<std::int32_t> acc(c_out * hw, 0);
    for (std::size_t co = 0; co < c_out; ++co)
        for (std::size_t p = 0; p < hw; ++p) {
            long long a = 0;
            for (std::size_t ci = 0; ci < c_in; ++ci)
                a += int(w.data[co * c_in + ci]) *
                     (int(x[(n * c_in + ci) * hw + p]) - x_qp.zero_point);
            acc[co * hw + p] = check_acc(a, where);
        }
    return acc;
}

// integer-only attention kernel, softmax computed in float between
// dequantize/requantize boundaries
inline QActivation quantized_attention(const QActivation& x, const AttentionSpec& spec,
                                       const QuantizedNetwork& net,
                                       const std::string& name) {
    const Shape4 s{x.q.extent(0), x.q.extent(1), x.q.extent(2), x.q.extent(3)};
    const std::size_t c = spec.c_out, half = c / 2, hw = s.h * s.w;
    const std::size_t wh = spec.window_h, ww = spec.window_w, win = wh * ww;
    const long ch_off = long(wh / 2), cw_off = long(ww / 2);

    const QuantizedTensor& wq = net.weight(name + ".w_q");
    const QuantizedTensor& wk = net.weight(name + ".w_k");
    const QuantizedTensor& wv = net.weight(name + ".w_v");
    const QuantizedTensor& er = net.weight(name + ".e_row");
    const QuantizedTensor& ec = net.weight(name + ".e_col");
    const QuantParams qp_q = net.site("node:" + name + ".q");
    const QuantParams qp_k = net.site("node:" + name + ".k");
    const QuantParams qp_v = net.site("node:" + name + ".v");
    const QuantParams qp_y = net.site("node:" + name);
    const QuantParams qp_a = prob_qparams();

    // embeddings as int32 offsets at the key-accumulator scale S_x * S_wk
    const double kacc_scale = x.qp.scale * wk.qp.scale;
    std::vector<std::int32_t> ebias(c * win);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t u = 0; u < wh; ++u)
            for (std::size_t v = 0; v < ww; ++v) {
                const double e = ch < half
                                     ? dequantize_value(ec.data[ch * ww + v], ec.qp)
                                     : dequantize_value(er.data[(ch - half) * wh + u], er.qp);
                ebias[ch * win + u * ww + v] = std::int32_t(llround_even(e / kacc_scale));
            }

    QActivation y{Tensor<std::int8_t>({s.n, c, s.h, s.w}), qp_y};
    const double mq = x.qp.scale * wq.qp.scale / qp_q.scale;
    const double mk = kacc_scale / qp_k.scale;
    const double mv = x.qp.scale * wv.qp.scale / qp_v.scale;
    const double my = qp_a.scale * qp_v.scale / qp_y.scale;
    const double logit_scale = qp_q.scale * qp_k.scale;

    std::vector<double> logits(win), probs(win);
    std::vector<std::int8_t> kq(win * c), aq(win);

    for (std::size_t n = 0; n < s.n; ++n) {
        auto acc_q = project_acc(x.q, x.qp, wq, n, hw, name.c_str());
        auto acc_k = project_acc(x.q, x.qp, wk, n, hw, name.c_str());
        auto acc_v = project_acc(x.q, x.qp, wv, n, hw, name.c_str());
        std::vector<std::int8_t> q8(c * hw), v8(c * hw);
        for (std::size_t i = 0; i < c * hw; ++i) {
            q8[i] = requant(acc_q[i], mq, qp_q.zero_point);
            v8[i] = requant(acc_v[i], mv, qp_v.zero_point);
        }
        for (std::size_t i = 0; i < s.h; ++i)
            for (std::size_t j = 0; j < s.w; ++j) {
                const std::size_t pix = i * s.w + j;
                for (std::size_t u = 0; u < wh; ++u)
                    for (std::size_t v = 0; v < ww; ++v) {
                        long si = long(i) + long(u) - ch_off;
                        long sj = long(j) + long(v) - cw_off;
                        const bool inb =
                            si >= 0 && si < long(s.h) && sj >= 0 && sj < long(s.w);
                        const std::size_t off = u * ww + v;
                        const std::size_t sp =
                            inb ? std::size_t(si) * s.w + std::size_t(sj) : 0;
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            long long a = ebias[ch * win + off];
                            if (inb) a += acc_k[ch * hw + sp];
                            kq[off * c + ch] =
                                requant(check_acc(a, "qattention"), mk, qp_k.zero_point);
                        }
                    }
                for (std::size_t off = 0; off < win; ++off) {
                    long long a = 0;
                    for (std::size_t ch = 0; ch < c; ++ch)
                        a += (int(q8[ch * hw + pix]) - qp_q.zero_point) *
                             (int(kq[off * c + ch]) - qp_k.zero_point);
                    logits[off] = logit_scale * double(check_acc(a, "qattention"));
                }
                double mx = logits[0];
                for (std::size_t off = 1; off < win; ++off) mx = std::max(mx, logits[off]);
                double sum = 0;
                for (std::size_t off = 0; off < win; ++off) {
                    probs[off] = std::exp(logits[off] - mx);
                    sum += probs[off];
                }
                for (std::size_t off = 0; off < win; ++off)
                    aq[off] = quantize_value(probs[off] / sum, qp_a);

                for (std::size_t ch = 0; ch < c; ++ch) {
                    long long a = 0;
                    for (std::size_t u = 0; u < wh; ++u)
                        for (std::size_t v = 0; v < ww; ++v) {
                            long si = long(i) + long(u) - ch_off;
                            long sj = long(j) + long(v) - cw_off;
                            const bool inb =
                                si >= 0 && si < long(s.h) && sj >= 0 && sj < long(s.w);
                            const int vq =
                                inb ? int(v8[ch * hw + std::size_t(si) * s.w +
                                           std::size_t(sj)])
                                    : qp_v.zero_point;  // padded values are exact zero
                            a += (int(aq[u * ww + v]) - qp_a.zero_point) *
                                 (vq - qp_v.zero_point);
                        }
                    y.q.at4(n, ch, i, j) =
                        requant(check_acc(a, "qattention"), my, qp_y.zero_point);
                }
            }
    }
    return y;
}

// elementwise requantization into a common output domain
inline void requant_into(const QActivation& src, const QuantParams& dst_qp,
                         std::int8_t* dst) {
    const double m = src.qp.scale / dst_qp.scale;
    for (std::size_t i = 0; i < src.q.numel(); ++i)
        dst[i] = requant(int(src.q[i]) - src.qp.zero_point, m, dst_qp.zero_point);
}

}  // namespace detail

// Integer inference over a quantized network; the input is quantized with the
// input site's qparams and the final node is dequantized back to float.
inline Tensor<float> quantized_forward(const QuantizedNetwork& net, const Tensor<float>& x) {
    using detail::QActivation;
    std::vector<QActivation> acts(net.nodes.size());
    std::vector<PoolIndices> pool_idx(net.nodes.size());
    Tensor<float> final_float;
    bool final_is_float = false;

    for (std::size_t ni = 0; ni < net.nodes.size(); ++ni) {
        const LayerNode& node = net.nodes[ni];
        auto in = [&](std::size_t i) -> const QActivation& {
            return acts[std::size_t(node.inputs.at(i))];
        };
        QActivation out;
        switch (node.kind) {
            case LayerKind::input: {
                auto qt = quantize_tensor(x, net.input_qp);
                out = {std::move(qt.data), net.input_qp};
                break;
            }
            case LayerKind::attention:
                out = detail::quantized_attention(in(0), node.att, net, node.name);
                break;
            case LayerKind::relu: {
                out = in(0);
                for (std::size_t i = 0; i < out.q.numel(); ++i)
                    out.q[i] = std::max(out.q[i], std::int8_t(out.qp.zero_point));
                break;
            }
            case LayerKind::maxpool: {
                auto r = maxpool2d(in(0).q, node.pool_k, node.pool_s, node.name);
                out = {std::move(r.y), in(0).qp};
                pool_idx[ni] = std::move(r.indices);
                break;
            }
            case LayerKind::maxunpool: {
                const auto& idx = pool_idx[std::size_t(node.unpool_src)];
                Tensor<std::int8_t> up(
                    {idx.input_shape.n, idx.input_shape.c, idx.input_shape.h,
                     idx.input_shape.w},
                    std::int8_t(in(0).qp.zero_point));  // empty slots are exact zero
                const auto& y = in(0).q;
                for (std::size_t i = 0; i < y.numel(); ++i)
                    up[std::size_t(idx.idx[i])] = y[i];
                out = {std::move(up), in(0).qp};
                break;
            }
            case LayerKind::concat: {
                const QuantParams qp = net.site("node:" + node.name);
                std::vector<Tensor<std::int8_t>> parts;
                for (std::size_t i = 0; i < node.inputs.size(); ++i) {
                    Tensor<std::int8_t> p(in(i).q.shape());
                    detail::requant_into(in(i), qp, p.data());
                    parts.push_back(std::move(p));
                }
                out = {concat(parts, 1), qp};
                break;
            }
            case LayerKind::flatten: {
                const auto& s = in(0).q.shape();
                out = {in(0).q.reshaped({s[0], s[1] * s[2] * s[3]}), in(0).qp};
                break;
            }
            case LayerKind::linear: {
                const QuantizedTensor& w = net.weight(node.name + ".w");
                const QuantParams qp = net.site("node:" + node.name);
                const auto& bias = net.biases.at(node.name + ".b");
                const std::size_t n = in(0).q.extent(0), d_in = in(0).q.extent(1),
                                  d_out = w.data.extent(0);
                const double m = in(0).qp.scale * w.qp.scale / qp.scale;
                out = {Tensor<std::int8_t>({n, d_out}), qp};
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t o = 0; o < d_out; ++o) {
                        long long a = bias[o];
                        for (std::size_t p = 0; p < d_in; ++p)
                            a += int(w.data[o * d_in + p]) *
                                 (int(in(0).q[i * d_in + p]) - in(0).qp.zero_point);
                        out.q[i * d_out + o] = detail::requant(
                            detail::check_acc(a, node.name.c_str()), m, qp.zero_point);
                    }
                break;
            }
            case LayerKind::conv1x1: {
                const QuantizedTensor& w = net.weight(node.name + ".w");
                const QuantParams qp = net.site("node:" + node.name);
                const auto& bias = net.biases.at(node.name + ".b");
                const auto& s = in(0).q.shape();
                const std::size_t hw = s[2] * s[3], c_out = w.data.extent(0),
                                  c_in = w.data.extent(1);
                const double m = in(0).qp.scale * w.qp.scale / qp.scale;
                out = {Tensor<std::int8_t>({s[0], c_out, s[2], s[3]}), qp};
                for (std::size_t n = 0; n < s[0]; ++n)
                    for (std::size_t o = 0; o < c_out; ++o)
                        for (std::size_t p = 0; p < hw; ++p) {
                            long long a = bias[o];
                            for (std::size_t ci = 0; ci < c_in; ++ci)
                                a += int(w.data[o * c_in + ci]) *
                                     (int(in(0).q[(n * c_in + ci) * hw + p]) -
                                      in(0).qp.zero_point);
                            out.q[(n * c_out + o) * hw + p] = detail::requant(
                                detail::check_acc(a, node.name.c_str()), m, qp.zero_point);
                        }
                break;
            }
            case LayerKind::sigmoid: {
                Tensor<float> f(in(0).q.shape());
                for (std::size_t i = 0; i < f.numel(); ++i)
                    f[i] = 1.0f /
                           (1.0f + std::exp(-float(dequantize_value(in(0).q[i], in(0).qp))));
                if (int(ni) == net.output) {
                    final_float = std::move(f);
                    final_is_float = true;
                } else {
                    throw ConfigError("quantized_forward: mid-graph sigmoid unsupported");
                }
                break;
            }
        }
        acts[ni] = std::move(out);
    }
    if (final_is_float) return final_float;
    const QActivation& o = acts[std::size_t(net.output)];
    Tensor<float> f(o.q.shape());
    for (std::size_t i = 0; i < f.numel(); ++i)
        f[i] = float(dequantize_value(o.q[i], o.qp));
    return f;
}

}  // namespace sadnn
