#pragma once

#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sadnn/graph.hpp"

namespace sadnn {

// pJ per scalar operation; defaults follow the published 45nm 0.9V estimates.
struct EnergyTable {
    struct Entry {
        double e_mul, e_add;
    };
    Entry int8{0.2, 0.03};
    Entry fp16{1.1, 0.40};
    Entry fp32{3.7, 0.90};

    const Entry& at(const std::string& precision) const {
        if (precision == "int8") return int8;
        if (precision == "fp16") return fp16;
        if (precision == "fp32") return fp32;
        throw ConfigError("energy table: unknown precision '" + precision + "'");
    }
};

struct LayerCost {
    std::string name;
    std::uint64_t params = 0;
    std::uint64_t ops_mul = 0;
    std::uint64_t ops_add = 0;
};

struct OpsCount {
    std::uint64_t ops_mul = 0;
    std::uint64_t ops_add = 0;
    std::vector<LayerCost> breakdown;

    // the reference tables report one combined scalar-op column
    std::uint64_t total_combined() const { return ops_mul + ops_add; }
};

struct CostReport {
    std::uint64_t params = 0;
    OpsCount ops;
    std::uint64_t size_bytes_fp32 = 0;
    std::uint64_t size_bytes_fp16 = 0;
    std::uint64_t size_bytes_int8 = 0;
    double energy_j_fp32 = 0;
    double energy_j_fp16 = 0;
    double energy_j_int8 = 0;
    std::vector<std::string> metadata;
};

inline std::uint64_t model_size_bytes(std::uint64_t params, const std::string& precision) {
    if (precision == "fp32") return params * 4;
    if (precision == "fp16") return params * 2;
    if (precision == "int8") return params * 1;
    throw ConfigError("model_size: unknown precision '" + precision + "'");
}

// Energy in the reference tables' units: scalar-op counts multiplied by the
// per-op pJ constants, with the tables' pJ -> J scaling applied (1e-9).
inline double estimate_energy(const OpsCount& ops, const EnergyTable& table,
                              const std::string& precision) {
    const auto& e = table.at(precision);
    return (double(ops.ops_mul) * e.e_mul + double(ops.ops_add) * e.e_add) * 1e-9;
}

// ---- declarative layer specs (for analyzing baseline networks) ----

struct LayerSpecDecl {
    std::string kind;  // input, conv2d, convtranspose2d, batchnorm, relu,
                       // maxpool, avgpool, attention, linear, concat, upsample
    std::map<std::string, long> fields;
    int line = 0;

    long get(const std::string& key, long def) const {
        auto it = fields.find(key);
        return it == fields.end() ? def : it->second;
    }
    long require(const std::string& key) const {
        auto it = fields.find(key);
        if (it == fields.end())
            throw ConfigError("spec line " + std::to_string(line) + ": " + kind +
                              " requires field '" + key + "'");
        return it->second;
    }
};

inline std::vector<LayerSpecDecl> parse_layer_specs(std::istream& is) {
    std::vector<LayerSpecDecl> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        LayerSpecDecl d;
        d.line = lineno;
        if (!(ls >> d.kind)) continue;  // blank line
        std::string tok;
        while (ls >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos)
                throw ConfigError("spec line " + std::to_string(lineno) +
                                  ": expected key=value, got '" + tok + "'");
            try {
                d.fields[tok.substr(0, eq)] = std::stol(tok.substr(eq + 1));
            } catch (const std::exception&) {
                throw ConfigError("spec line " + std::to_string(lineno) +
                                  ": bad integer in '" + tok + "'");
            }
        }
        out.push_back(std::move(d));
    }
    return out;
}

inline std::vector<LayerSpecDecl> parse_layer_specs(const std::string& text) {
    std::istringstream is(text);
    return parse_layer_specs(is);
}

// Shape inference plus parameter and scalar-op counting over a declarative
// spec. Counting conventions: one MAC = one mul + one add; elementwise ops
// (activations, pooling comparisons, softmax exp/div, batchnorm folding) are
// excluded from op counts; conv2d defaults to bias=0, linear and
// convtranspose2d to bias=1.
inline std::pair<std::uint64_t, OpsCount> analyze_layer_specs(
    const std::vector<LayerSpecDecl>& decls) {
    std::uint64_t params = 0;
    OpsCount ops;
    long c = 0, h = 0, w = 0;  // shape cursor
    bool have_input = false;

    for (const auto& d : decls) {
        auto fail = [&](const std::string& msg) -> void {
            throw ConfigError("spec line " + std::to_string(d.line) + " (" + d.kind +
                              "): " + msg);
        };
        // per-line overrides reposition the cursor (used by branch layers)
        const long in_c = d.get("in", c), in_h = d.get("h", h), in_w = d.get("w", w);

        LayerCost lc;
        lc.name = d.kind + "@" + std::to_string(d.line);
        long out_c = in_c, out_h = in_h, out_w = in_w;

        if (d.kind == "input") {
            out_c = d.require("c");
            out_h = d.require("h");
            out_w = d.require("w");
            have_input = true;
        } else if (!have_input) {
            fail("spec must start with an input line");
        } else if (d.kind == "conv2d" || d.kind == "convtranspose2d") {
            const long k = d.require("k"), s = d.get("stride", 1), p = d.get("pad", 0);
            out_c = d.require("out");
            const bool bias = d.get("bias", d.kind == "conv2d" ? 0 : 1) != 0;
            if (d.kind == "conv2d") {
                out_h = (in_h + 2 * p - k) / s + 1;
                out_w = (in_w + 2 * p - k) / s + 1;
            } else {
                out_h = (in_h - 1) * s - 2 * p + k;
                out_w = (in_w - 1) * s - 2 * p + k;
            }
            if (out_h <= 0 || out_w <= 0) fail("shape inference produced empty output");
            lc.params = std::uint64_t(out_c) * in_c * k * k + (bias ? out_c : 0);
            lc.ops_mul = std::uint64_t(out_h) * out_w * out_c * in_c * k * k;
            lc.ops_add = lc.ops_mul;
        } else if (d.kind == "batchnorm") {
            lc.params = 2 * std::uint64_t(in_c);
        } else if (d.kind == "relu") {
            // excluded from op counts
        } else if (d.kind == "maxpool") {
            const long k = d.require("k"), s = d.get("stride", k), p = d.get("pad", 0);
            out_h = (in_h + 2 * p - k) / s + 1;
            out_w = (in_w + 2 * p - k) / s + 1;
            if (out_h <= 0 || out_w <= 0) fail("shape inference produced empty output");
        } else if (d.kind == "avgpool") {
            out_h = 1;
            out_w = 1;
        } else if (d.kind == "attention") {
            AttentionSpec a;
            a.c_in = std::size_t(in_c);
            a.c_out = std::size_t(d.require("out"));
            a.window_h = a.window_w = std::size_t(d.get("window", 3));
            out_c = long(a.c_out);
            lc.params = attention_param_count(a);
            const auto oc = attention_op_count(a, std::size_t(out_h), std::size_t(out_w));
            lc.ops_mul = oc.mul_total;
            lc.ops_add = oc.add_total;
        } else if (d.kind == "linear") {
            const long d_in = d.get("in", in_h == 1 && in_w == 1 ? in_c : in_c * in_h * in_w);
            const long d_out = d.require("out");
            const bool bias = d.get("bias", 1) != 0;
            lc.params = std::uint64_t(d_out) * d_in + (bias ? d_out : 0);
            lc.ops_mul = std::uint64_t(d_out) * d_in;
            lc.ops_add = lc.ops_mul;
            out_c = d_out;
            out_h = out_w = 1;
        } else if (d.kind == "concat") {
            out_c = in_c + d.require("add");
        } else if (d.kind == "upsample" || d.kind == "maxunpool") {
            const long s = d.get("scale", 2);
            out_h = in_h * s;
            out_w = in_w * s;
        } else {
            fail("unknown layer kind");
        }

        // branch lines (explicit in=/h=/w= overrides) do not advance the cursor
        if (d.fields.count("branch") == 0) {
            c = out_c;
            h = out_h;
            w = out_w;
        }
        params += lc.params;
        ops.ops_mul += lc.ops_mul;
        ops.ops_add += lc.ops_add;
        ops.breakdown.push_back(std::move(lc));
    }
    if (!have_input && !decls.empty())
        throw ConfigError("spec: missing input line");
    return {params, ops};
}

// Cost of a built NetworkGraph (shapes must have been validated).
inline std::pair<std::uint64_t, OpsCount> analyze_graph(const NetworkGraph& g) {
    std::uint64_t params = 0;
    OpsCount ops;
    for (const auto& node : g.nodes) {
        LayerCost lc;
        lc.name = node.name;
        switch (node.kind) {
            case LayerKind::attention: {
                lc.params = attention_param_count(node.att);
                const auto oc =
                    attention_op_count(node.att, node.out_shape[2], node.out_shape[3]);
                lc.ops_mul = oc.mul_total;
                lc.ops_add = oc.add_total;
                break;
            }
            case LayerKind::linear:
                lc.params = node.lin_out * node.lin_in + node.lin_out;
                lc.ops_mul = std::uint64_t(node.lin_out) * node.lin_in;
                lc.ops_add = lc.ops_mul;
                break;
            case LayerKind::conv1x1:
                lc.params = node.lin_out * node.lin_in + node.lin_out;
                lc.ops_mul = std::uint64_t(node.lin_out) * node.lin_in *
                             node.out_shape[2] * node.out_shape[3];
                lc.ops_add = lc.ops_mul;
                break;
            default:
                break;
        }
        params += lc.params;
        ops.ops_mul += lc.ops_mul;
        ops.ops_add += lc.ops_add;
        ops.breakdown.push_back(std::move(lc));
    }
    return {params, ops};
}

inline CostReport make_report(std::uint64_t params, OpsCount ops,
                              const EnergyTable& table = {}) {
    CostReport r;
    r.params = params;
    r.size_bytes_fp32 = model_size_bytes(params, "fp32");
    r.size_bytes_fp16 = model_size_bytes(params, "fp16");
    r.size_bytes_int8 = model_size_bytes(params, "int8");
    r.energy_j_fp32 = estimate_energy(ops, table, "fp32");
    r.energy_j_fp16 = estimate_energy(ops, table, "fp16");
    r.energy_j_int8 = estimate_energy(ops, table, "int8");
    r.ops = std::move(ops);
    r.metadata = {
        "ops counted at MAC granularity: one multiply plus one accumulation add",
        "attention ops use the 2*b^2*c_out per-pixel convention; projections excluded",
        "elementwise ops (relu, pooling comparisons, softmax exp/div) excluded",
        "the combined ops column is ops_mul + ops_add",
        "energy follows the reference tables' pJ->J scaling",
        "sizes are raw parameter bytes; container overhead reported separately"};
    return r;
}

inline nlohmann::ordered_json report_to_json(const CostReport& r,
                                             bool with_breakdown = false) {
    nlohmann::ordered_json j;
    j["params"] = r.params;
    j["ops_mul"] = r.ops.ops_mul;
    j["ops_add"] = r.ops.ops_add;
    j["ops_total_combined"] = r.ops.total_combined();
    j["size_bytes_fp32"] = r.size_bytes_fp32;
    j["size_bytes_fp16"] = r.size_bytes_fp16;
    j["size_bytes_int8"] = r.size_bytes_int8;
    j["energy_j_fp32"] = r.energy_j_fp32;
    j["energy_j_fp16"] = r.energy_j_fp16;
    j["energy_j_int8"] = r.energy_j_int8;
    j["metadata"] = r.metadata;
    if (with_breakdown) {
        auto& b = j["per_layer"] = nlohmann::ordered_json::array();
        for (const auto& lc : r.ops.breakdown)
            b.push_back({{"name", lc.name},
                         {"params", lc.params},
                         {"ops_mul", lc.ops_mul},
                         {"ops_add", lc.ops_add}});
    }
    return j;
}

inline std::string render_report(const CostReport& r, const std::string& format,
                                 bool combined_ops = false) {
    if (format == "structured") return report_to_json(r).dump(2) + "\n";
    if (format != "human") throw ConfigError("render_report: unknown format " + format);
    std::ostringstream os;
    os << std::left;
    os << std::setw(28) << "params" << r.params << "\n";
    os << std::setw(28) << "ops (mul)" << r.ops.ops_mul << "\n";
    os << std::setw(28) << "ops (add)" << r.ops.ops_add << "\n";
    if (combined_ops)
        os << std::setw(28) << "ops (mul+add combined)" << r.ops.total_combined()
           << "\n";
    os << std::setw(28) << "model size fp32 (bytes)" << r.size_bytes_fp32 << "\n";
    os << std::setw(28) << "model size int8 (bytes)" << r.size_bytes_int8 << "\n";
    os << std::setw(28) << "energy fp32 (J)" << r.energy_j_fp32 << "\n";
    os << std::setw(28) << "energy fp16 (J)" << r.energy_j_fp16 << "\n";
    os << std::setw(28) << "energy int8 (J)" << r.energy_j_int8 << "\n";
    return os.str();
}

}  // namespace sadnn
