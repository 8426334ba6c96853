#pragma once

#include <thread>

#include "sadnn/data.hpp"
#include "sadnn/graph.hpp"

namespace sadnn {

namespace detail {

inline void add_attention_params(NetworkGraph& g, const std::string& name,
                                 const AttentionSpec& spec, Rng& rng) {
    auto w = AttentionWeights<float>::init(spec, rng);
    g.params[name + ".w_q"] = std::move(w.w_q);
    g.params[name + ".w_k"] = std::move(w.w_k);
    g.params[name + ".w_v"] = std::move(w.w_v);
    g.params[name + ".e_row"] = std::move(w.e_row);
    g.params[name + ".e_col"] = std::move(w.e_col);
}

inline void add_linear_params(NetworkGraph& g, const std::string& name, std::size_t d_out,
                              std::size_t d_in, Rng& rng) {
    Tensor<float> w({d_out, d_in});
    const float b = 1.0f / std::sqrt(float(d_in));
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = float(rng.uniform(-b, b));
    g.params[name + ".w"] = std::move(w);
    g.params[name + ".b"] = Tensor<float>({d_out});
}

inline int add_attention_node(NetworkGraph& g, const std::string& name, int in,
                              std::size_t c_in, std::size_t c_out, std::size_t window,
                              Rng& rng) {
    LayerNode n;
    n.kind = LayerKind::attention;
    n.name = name;
    n.inputs = {in};
    n.att = AttentionSpec{c_in, c_out, window, window, PadMode::zero};
    add_attention_params(g, name, n.att, rng);
    return g.add(std::move(n));
}

}  // namespace detail

inline void check_config(const ModelConfig& cfg) {
    if (cfg.channels.empty()) throw ConfigError("model config: no stages");
    for (std::size_t c : cfg.channels)
        if (c % 2 != 0) throw ConfigError("model config: channel counts must be even");
    if (cfg.window % 2 == 0) throw ConfigError("model config: window must be odd");
    std::size_t h = cfg.in_h, w = cfg.in_w;
    for (std::size_t s = 0; s < cfg.channels.size(); ++s) {
        if (h % 2 != 0 || w % 2 != 0)
            throw ConfigError("model config: stage " + std::to_string(s) +
                              " spatial dims not divisible by pooling");
        h /= 2;
        w /= 2;
    }
}

// Alternating attention blocks and attention-down blocks, then a linear head
// sized to the number of target classes. Output node holds logits.
inline NetworkGraph build_sadnn_cls(const ModelConfig& cfg, std::uint64_t init_seed = 1) {
    check_config(cfg);
    NetworkGraph g;
    g.cfg = cfg;
    Rng rng(init_seed);

    int cur = g.add({.kind = LayerKind::input, .name = "input"});
    std::size_t c_prev = cfg.in_c, h = cfg.in_h, w = cfg.in_w;
    for (std::size_t s = 0; s < cfg.channels.size(); ++s) {
        const std::size_t c = cfg.channels[s];
        const std::string tag = std::to_string(s + 1);
        // attention block
        cur = detail::add_attention_node(g, "enc" + tag + "a", cur, c_prev, c, cfg.window, rng);
        cur = g.add({.kind = LayerKind::relu, .name = "relu" + tag + "a", .inputs = {cur}});
        // attention down block
        cur = detail::add_attention_node(g, "enc" + tag + "b", cur, c, c, cfg.window, rng);
        cur = g.add({.kind = LayerKind::relu, .name = "relu" + tag + "b", .inputs = {cur}});
        cur = g.add({.kind = LayerKind::maxpool, .name = "pool" + tag, .inputs = {cur}});
        c_prev = c;
        h /= 2;
        w /= 2;
    }
    cur = g.add({.kind = LayerKind::flatten, .name = "flatten", .inputs = {cur}});
    const std::size_t feat = c_prev * h * w;
    detail::add_linear_params(g, "fc1", cfg.head_width, feat, rng);
    cur = g.add({.kind = LayerKind::linear, .name = "fc1", .inputs = {cur},
                 .lin_in = feat, .lin_out = cfg.head_width});
    cur = g.add({.kind = LayerKind::relu, .name = "relu_fc", .inputs = {cur}});
    detail::add_linear_params(g, "fc2", cfg.num_classes, cfg.head_width, rng);
    cur = g.add({.kind = LayerKind::linear, .name = "fc2", .inputs = {cur},
                 .lin_in = cfg.head_width, .lin_out = cfg.num_classes});
    g.output = cur;
    g.validate();
    return g;
}

// Attention encoder-decoder: encoder stages of attention+ReLU+maxpool,
// decoder of index-transfer unpooling, concatenation skips and attention
// blocks, closed by a pointwise projection and sigmoid.
inline NetworkGraph build_sadnn_seg(const ModelConfig& cfg, std::uint64_t init_seed = 1) {
    check_config(cfg);
    NetworkGraph g;
    g.cfg = cfg;
    Rng rng(init_seed);
    const std::size_t stages = cfg.channels.size();

    int cur = g.add({.kind = LayerKind::input, .name = "input"});
    std::vector<int> skip(stages), pool(stages);
    std::size_t c_prev = cfg.in_c;
    for (std::size_t s = 0; s < stages; ++s) {
        const std::size_t c = cfg.channels[s];
        const std::string tag = std::to_string(s + 1);
        cur = detail::add_attention_node(g, "enc" + tag, cur, c_prev, c, cfg.window, rng);
        cur = g.add({.kind = LayerKind::relu, .name = "erelu" + tag, .inputs = {cur}});
        skip[s] = cur;
        pool[s] = g.add({.kind = LayerKind::maxpool, .name = "pool" + tag, .inputs = {cur}});
        cur = pool[s];
        c_prev = c;
    }
    for (std::size_t s = stages; s-- > 0;) {
        const std::string tag = std::to_string(s + 1);
        LayerNode up;
        up.kind = LayerKind::maxunpool;
        up.name = "unpool" + tag;
        up.inputs = {cur};
        up.unpool_src = pool[s];
        cur = g.add(std::move(up));
        cur = g.add({.kind = LayerKind::concat, .name = "skip" + tag,
                     .inputs = {cur, skip[s]}});
        const std::size_t c_in = 2 * cfg.channels[s];
        const std::size_t c_out = s > 0 ? cfg.channels[s - 1] : cfg.channels[0];
        cur = detail::add_attention_node(g, "dec" + tag, cur, c_in, c_out, cfg.window, rng);
        cur = g.add({.kind = LayerKind::relu, .name = "drelu" + tag, .inputs = {cur}});
    }
    const std::size_t c_last = cfg.channels[0];
    detail::add_linear_params(g, "head", cfg.num_classes, c_last, rng);
    cur = g.add({.kind = LayerKind::conv1x1, .name = "head", .inputs = {cur},
                 .lin_in = c_last, .lin_out = cfg.num_classes});
    cur = g.add({.kind = LayerKind::sigmoid, .name = "out_sigmoid", .inputs = {cur}});
    g.output = cur;
    g.validate();
    return g;
}

inline NetworkGraph build_model(const ModelConfig& cfg, std::uint64_t init_seed = 1) {
    if (cfg.task == "cls") return build_sadnn_cls(cfg, init_seed);
    if (cfg.task == "seg") return build_sadnn_seg(cfg, init_seed);
    throw ConfigError("build_model: unknown task '" + cfg.task + "'");
}

// Repo-pinned toy configurations.
inline ModelConfig toy_cls_config() {
    return ModelConfig{"cls", 1, 32, 32, {8, 16, 32}, 3, 64, 3};
}
inline ModelConfig toy_seg_config() {
    return ModelConfig{"seg", 1, 32, 32, {16, 32, 64}, 3, 64, 1};
}

// ---- config <-> int record (for checkpoint metadata) ----

inline Tensor<std::int32_t> encode_config(const ModelConfig& cfg) {
    std::vector<std::int32_t> v{cfg.task == "seg" ? 1 : 0, std::int32_t(cfg.in_c),
                                std::int32_t(cfg.in_h), std::int32_t(cfg.in_w),
                                std::int32_t(cfg.window), std::int32_t(cfg.head_width),
                                std::int32_t(cfg.num_classes),
                                std::int32_t(cfg.channels.size())};
    for (std::size_t c : cfg.channels) v.push_back(std::int32_t(c));
    const std::size_t n = v.size();
    return Tensor<std::int32_t>({n}, std::move(v));
}

inline ModelConfig decode_config(const Tensor<std::int32_t>& t) {
    if (t.numel() < 8) throw IoError("checkpoint: malformed model config record");
    ModelConfig cfg;
    cfg.task = t[0] == 1 ? "seg" : "cls";
    cfg.in_c = std::size_t(t[1]);
    cfg.in_h = std::size_t(t[2]);
    cfg.in_w = std::size_t(t[3]);
    cfg.window = std::size_t(t[4]);
    cfg.head_width = std::size_t(t[5]);
    cfg.num_classes = std::size_t(t[6]);
    const std::size_t stages = std::size_t(t[7]);
    if (t.numel() != 8 + stages) throw IoError("checkpoint: malformed model config record");
    for (std::size_t s = 0; s < stages; ++s) cfg.channels.push_back(std::size_t(t[8 + s]));
    return cfg;
}

// ---- metrics ----

// exact-match accuracy of the thresholded per-label sigmoid scores
inline double subset_accuracy(const NetworkGraph& g, const Dataset& data) {
    if (data.empty()) throw ConfigError("subset_accuracy: empty dataset");
    std::size_t hits = 0;
    Tensor<float> batch = stack_images(data, 0, data.size());
    Tensor<float> logits = forward(g, batch);
    const std::size_t nl = logits.extent(1);
    for (std::size_t i = 0; i < data.size(); ++i) {
        bool ok = true;
        for (std::size_t l = 0; l < nl; ++l) {
            const bool pred = logits[i * nl + l] > 0.0f;  // sigmoid(z) > 0.5
            const bool truth = data[i].label[l] > 0.5f;
            ok = ok && pred == truth;
        }
        hits += ok;
    }
    return double(hits) / double(data.size());
}

inline double dice_coefficient(const Tensor<float>& pred_mask, const Tensor<float>& truth,
                               float threshold = 0.5f) {
    std::size_t inter = 0, psum = 0, gsum = 0;
    for (std::size_t i = 0; i < pred_mask.numel(); ++i) {
        const bool p = pred_mask[i] > threshold, t = truth[i] > 0.5f;
        inter += p && t;
        psum += p;
        gsum += t;
    }
    if (psum + gsum == 0) return 1.0;
    return 2.0 * double(inter) / double(psum + gsum);
}

inline double mean_dsc(const NetworkGraph& g, const Dataset& data) {
    if (data.empty()) throw ConfigError("mean_dsc: empty dataset");
    Tensor<float> batch = stack_images(data, 0, data.size());
    Tensor<float> pred = forward(g, batch);
    const std::size_t per = pred.numel() / data.size();
    double total = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        Tensor<float> p({per}, std::vector<float>(pred.data() + i * per,
                                                  pred.data() + (i + 1) * per));
        total += dice_coefficient(p, data[i].label.reshaped({per}));
    }
    return total / double(data.size());
}

// ---- training ----

struct TrainOptions {
    std::size_t epochs = 15;
    double lr = 1e-4;
    std::size_t batch_size = 16;
    std::uint64_t seed = 7;
    std::size_t threads = 1;
};

struct EpochStats {
    double loss = 0;
    double metric = 0;  // subset accuracy (cls) or DSC (seg)
};

using GradMap = std::map<std::string, Tensor<float>>;

// Per-sample loss and parameter gradients (batch contribution weight applied
// by the caller).
inline std::pair<double, GradMap> sample_gradients(const NetworkGraph& g,
                                                   const SyntheticSample& sample) {
    const auto& is = sample.image.shape();
    Tensor<float> x({1, is[0], is[1], is[2]},
                    std::vector<float>(sample.image.vec()));
    auto ex = run_forward(g, x);
    typename Tape<float>::Id loss_id;
    if (g.cfg.task == "cls") {
        Tensor<float> t({1, sample.label.numel()}, std::vector<float>(sample.label.vec()));
        loss_id = ex.tape.bce(ex.node_out[std::size_t(g.output)], std::move(t));
    } else {
        const auto& out = ex.output(g);
        Tensor<float> t = sample.label.reshaped(out.shape());
        loss_id = ex.tape.dice(ex.node_out[std::size_t(g.output)], std::move(t));
    }
    const double loss = ex.tape.value(loss_id)[0];
    auto grads = ex.tape.backward(loss_id);
    GradMap gm;
    for (const auto& [name, id] : ex.param_ids) gm[name] = std::move(grads[std::size_t(id)]);
    return {loss, std::move(gm)};
}

// Adam training at toy scale. Deterministic given (seed, data); per-sample
// gradients are reduced in sample order so results do not depend on the
// thread count.
inline std::vector<EpochStats> train(NetworkGraph& g, const Dataset& data,
                                     const TrainOptions& opt,
                                     const Dataset* eval_data = nullptr) {
    if (data.empty()) throw ConfigError("train: empty dataset");
    Rng rng(opt.seed);
    AdamState<float> state;
    std::vector<EpochStats> trace;
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const std::size_t threads = std::max<std::size_t>(1, opt.threads);
    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        // Fisher-Yates shuffle
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_index(i)]);

        double epoch_loss = 0;
        std::size_t seen = 0;
        for (std::size_t b = 0; b < data.size(); b += opt.batch_size) {
            const std::size_t bsz = std::min(opt.batch_size, data.size() - b);
            std::vector<std::pair<double, GradMap>> per_sample(bsz);
            auto worker = [&](std::size_t tid) {
                for (std::size_t i = tid; i < bsz; i += threads)
                    per_sample[i] = sample_gradients(g, data[order[b + i]]);
            };
            if (threads == 1) {
                worker(0);
            } else {
                std::vector<std::thread> pool;
                for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
                for (auto& t : pool) t.join();
            }

            double batch_loss = 0;
            GradMap total;
            const float w = 1.0f / float(bsz);
            for (std::size_t i = 0; i < bsz; ++i) {
                batch_loss += per_sample[i].first;
                for (auto& [name, grad] : per_sample[i].second) {
                    auto [it, fresh] = total.try_emplace(name, grad.shape());
                    for (std::size_t k = 0; k < grad.numel(); ++k)
                        it->second[k] += w * grad[k];
                }
            }
            batch_loss /= double(bsz);
            if (!std::isfinite(batch_loss))
                throw NumericError("train: non-finite loss at epoch " +
                                   std::to_string(epoch + 1) + " batch " +
                                   std::to_string(b / opt.batch_size + 1));
            adam_step(g.params, total, state, float(opt.lr));
            epoch_loss += batch_loss * double(bsz);
            seen += bsz;
        }

        EpochStats es;
        es.loss = epoch_loss / double(seen);
        const Dataset& md = eval_data ? *eval_data : data;
        es.metric = g.cfg.task == "cls" ? subset_accuracy(g, md) : mean_dsc(g, md);
        trace.push_back(es);
    }
    return trace;
}

}  // namespace sadnn
