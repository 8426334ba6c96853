#pragma once

#include <map>
#include <string>
#include <vector>

#include "sadnn/autograd.hpp"

namespace sadnn {

enum class LayerKind {
    input,
    attention,
    relu,
    maxpool,
    maxunpool,
    concat,
    flatten,
    linear,
    conv1x1,
    sigmoid
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::input: return "input";
        case LayerKind::attention: return "attention";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::maxunpool: return "maxunpool";
        case LayerKind::concat: return "concat";
        case LayerKind::flatten: return "flatten";
        case LayerKind::linear: return "linear";
        case LayerKind::conv1x1: return "conv1x1";
        case LayerKind::sigmoid: return "sigmoid";
    }
    return "?";
}

struct LayerNode {
    LayerKind kind = LayerKind::input;
    std::string name;
    std::vector<int> inputs;       // producer node ids (append-only, acyclic)
    AttentionSpec att;             // attention nodes
    std::size_t pool_k = 2, pool_s = 2;
    int unpool_src = -1;           // paired encoder maxpool node (index edge)
    std::size_t lin_in = 0, lin_out = 0;  // linear / conv1x1
    std::vector<std::size_t> out_shape;   // filled by validate()
};

struct ModelConfig {
    std::string task = "cls";              // "cls" or "seg"
    std::size_t in_c = 1, in_h = 32, in_w = 32;
    std::vector<std::size_t> channels;     // channel progression per stage
    std::size_t window = 3;
    std::size_t head_width = 64;           // cls linear head
    std::size_t num_classes = 3;           // labels (cls) or mask channels (seg)
};

struct NetworkGraph {
    std::vector<LayerNode> nodes;
    std::map<std::string, Tensor<float>> params;
    ModelConfig cfg;
    int output = -1;

    int add(LayerNode n) {
        for (int i : n.inputs)
            if (i < 0 || i >= int(nodes.size()))
                throw ConfigError("graph: edge from unknown node in " + n.name);
        nodes.push_back(std::move(n));
        return int(nodes.size()) - 1;
    }

    const Tensor<float>& param(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw ConfigError("graph: missing parameter " + name);
        return it->second;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& [k, v] : params) n += v.numel();
        return n;
    }

    // Shape inference over the whole graph with batch extent `batch`.
    // Throws a build error naming the offending layer on any inconsistency.
    void validate(std::size_t batch = 1) {
        for (auto& node : nodes) {
            auto in_shape = [&](std::size_t i) -> const std::vector<std::size_t>& {
                return nodes[std::size_t(node.inputs.at(i))].out_shape;
            };
            switch (node.kind) {
                case LayerKind::input:
                    node.out_shape = {batch, cfg.in_c, cfg.in_h, cfg.in_w};
                    break;
                case LayerKind::attention: {
                    node.att.validate();
                    const auto& s = in_shape(0);
                    if (s.size() != 4 || s[1] != node.att.c_in)
                        throw ConfigError("graph: " + node.name + ": expects " +
                                          std::to_string(node.att.c_in) + " channels");
                    node.out_shape = {s[0], node.att.c_out, s[2], s[3]};
                    break;
                }
                case LayerKind::relu:
                case LayerKind::sigmoid:
                    node.out_shape = in_shape(0);
                    break;
                case LayerKind::maxpool: {
                    const auto& s = in_shape(0);
                    if ((s[2] - node.pool_k) % node.pool_s != 0 ||
                        (s[3] - node.pool_k) % node.pool_s != 0 ||
                        s[2] < node.pool_k || s[3] < node.pool_k)
                        throw ConfigError("graph: " + node.name +
                                          ": spatial dims not divisible by pooling");
                    node.out_shape = {s[0], s[1], (s[2] - node.pool_k) / node.pool_s + 1,
                                      (s[3] - node.pool_k) / node.pool_s + 1};
                    break;
                }
                case LayerKind::maxunpool: {
                    if (node.unpool_src < 0 ||
                        nodes[std::size_t(node.unpool_src)].kind != LayerKind::maxpool)
                        throw ConfigError("graph: " + node.name +
                                          ": needs a pool-index edge from a maxpool node");
                    const auto& pool = nodes[std::size_t(node.unpool_src)];
                    const auto& s = in_shape(0);
                    if (s != pool.out_shape)
                        throw ConfigError("graph: " + node.name +
                                          ": input shape differs from paired pool output");
                    // restores the mirror encoder pre-pool shape
                    node.out_shape = nodes[std::size_t(pool.inputs[0])].out_shape;
                    break;
                }
                case LayerKind::concat: {
                    const auto& a = in_shape(0);
                    std::size_t c = 0;
                    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
                        const auto& s = in_shape(i);
                        if (s[0] != a[0] || s[2] != a[2] || s[3] != a[3])
                            throw ConfigError("graph: " + node.name +
                                              ": concat operands disagree off-channel");
                        c += s[1];
                    }
                    node.out_shape = {a[0], c, a[2], a[3]};
                    break;
                }
                case LayerKind::flatten: {
                    const auto& s = in_shape(0);
                    node.out_shape = {s[0], s[1] * s[2] * s[3]};
                    break;
                }
                case LayerKind::linear: {
                    const auto& s = in_shape(0);
                    if (s.size() != 2 || s[1] != node.lin_in)
                        throw ConfigError("graph: " + node.name + ": expects " +
                                          std::to_string(node.lin_in) + " features");
                    node.out_shape = {s[0], node.lin_out};
                    break;
                }
                case LayerKind::conv1x1: {
                    const auto& s = in_shape(0);
                    if (s.size() != 4 || s[1] != node.lin_in)
                        throw ConfigError("graph: " + node.name + ": expects " +
                                          std::to_string(node.lin_in) + " channels");
                    node.out_shape = {s[0], node.lin_out, s[2], s[3]};
                    break;
                }
            }
        }
        if (output < 0 || output >= int(nodes.size()))
            throw ConfigError("graph: output node not set");
    }
};

// One forward execution of a graph on a tape: node/tape id mapping plus the
// leaf ids of every parameter (for gradient collection).
template <class T>
struct Execution {
    Tape<T> tape;
    std::vector<typename Tape<T>::Id> node_out;
    typename Tape<T>::Id input_id = -1;
    std::map<std::string, typename Tape<T>::Id> param_ids;

    const Tensor<T>& output(const NetworkGraph& g) const {
        return tape.value(node_out[std::size_t(g.output)]);
    }
};

template <class T>
Execution<T> run_forward(const NetworkGraph& g, const Tensor<T>& x,
                         OpCounter* counter = nullptr) {
    Execution<T> ex;
    auto pid = [&](const std::string& name) {
        auto it = ex.param_ids.find(name);
        if (it != ex.param_ids.end()) return it->second;
        Tensor<T> p = g.param(name).template cast<T>();
        auto id = ex.tape.leaf(std::move(p), name);
        ex.param_ids[name] = id;
        return id;
    };

    ex.node_out.resize(g.nodes.size(), -1);
    for (std::size_t ni = 0; ni < g.nodes.size(); ++ni) {
        const LayerNode& node = g.nodes[ni];
        auto in = [&](std::size_t i) { return ex.node_out[std::size_t(node.inputs.at(i))]; };
        typename Tape<T>::Id out = -1;
        switch (node.kind) {
            case LayerKind::input: {
                if (x.rank() != 4 || x.extent(1) != g.cfg.in_c ||
                    x.extent(2) != g.cfg.in_h || x.extent(3) != g.cfg.in_w)
                    throw ShapeError("forward: input shape " +
                                     Tensor<T>::shape_str(x.shape()) +
                                     " does not match graph input");
                out = ex.tape.leaf(x, node.name);
                ex.input_id = out;
                break;
            }
            case LayerKind::attention:
                out = ex.tape.attention(in(0), pid(node.name + ".w_q"),
                                        pid(node.name + ".w_k"), pid(node.name + ".w_v"),
                                        pid(node.name + ".e_row"),
                                        pid(node.name + ".e_col"), node.att, counter,
                                        node.name);
                break;
            case LayerKind::relu:
                out = ex.tape.relu(in(0));
                break;
            case LayerKind::sigmoid:
                out = ex.tape.sigmoid(in(0));
                break;
            case LayerKind::maxpool:
                out = ex.tape.maxpool(in(0), node.pool_k, node.pool_s, node.name);
                break;
            case LayerKind::maxunpool:
                out = ex.tape.maxunpool(in(0), ex.node_out[std::size_t(node.unpool_src)],
                                        node.name);
                break;
            case LayerKind::concat: {
                std::vector<typename Tape<T>::Id> xs;
                for (std::size_t i = 0; i < node.inputs.size(); ++i) xs.push_back(in(i));
                out = ex.tape.concat(xs, 1);
                break;
            }
            case LayerKind::flatten: {
                const auto& s = ex.tape.value(in(0)).shape();
                out = ex.tape.reshape(in(0), {s[0], s[1] * s[2] * s[3]});
                break;
            }
            case LayerKind::linear:
                out = ex.tape.linear(in(0), pid(node.name + ".w"), pid(node.name + ".b"),
                                     counter, node.name);
                break;
            case LayerKind::conv1x1:
                out = ex.tape.conv1x1(in(0), pid(node.name + ".w"), pid(node.name + ".b"),
                                      counter, node.name);
                break;
        }
        ex.node_out[ni] = out;
    }
    return ex;
}

// Convenience single-output forward.
template <class T>
Tensor<T> forward(const NetworkGraph& g, const Tensor<T>& x, OpCounter* counter = nullptr) {
    auto ex = run_forward(g, x, counter);
    return ex.output(g);
}

}  // namespace sadnn
