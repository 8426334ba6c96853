#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sadnn/cost.hpp"
#include "sadnn/io.hpp"
#include "sadnn/synth.hpp"
#include "sadnn/verify.hpp"

namespace {

using nlohmann::ordered_json;

std::size_t default_threads() {
    if (const char* env = std::getenv("SADNN_THREADS")) {
        const long v = std::atol(env);
        if (v > 0) return std::size_t(v);
    }
    return 1;
}

sadnn::Dataset make_dataset(const std::string& task, std::size_t n, std::uint64_t seed,
                            const sadnn::ModelConfig& cfg) {
    return task == "cls" ? sadnn::synth_cls_dataset(n, seed, cfg.in_h, cfg.in_w)
                         : sadnn::synth_seg_dataset(n, seed, cfg.in_h, cfg.in_w);
}

void require_writable(const std::string& path) {
    std::ofstream probe(path, std::ios::binary | std::ios::app);
    if (!probe) throw sadnn::IoError("output path '" + path + "' is not writable");
}

// nearest-neighbor resize of a 1xHxW image
sadnn::Tensor<float> resize_nearest(const sadnn::Tensor<float>& img, std::size_t oh,
                                    std::size_t ow) {
    const std::size_t ih = img.extent(1), iw = img.extent(2);
    sadnn::Tensor<float> out({1, oh, ow});
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
            const std::size_t si = std::min(ih - 1, i * ih / oh);
            const std::size_t sj = std::min(iw - 1, j * iw / ow);
            out[i * ow + j] = img[si * iw + sj];
        }
    return out;
}

sadnn::EnergyTable load_energy_table(const std::string& path) {
    sadnn::EnergyTable t;
    if (path.empty()) return t;
    std::ifstream is(path);
    if (!is) throw sadnn::IoError("cannot open energy table '" + path + "'");
    ordered_json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw sadnn::ConfigError("energy table '" + path + "': " + e.what());
    }
    auto fill = [&](const char* key, sadnn::EnergyTable::Entry& e) {
        if (!j.contains(key)) return;
        e.e_mul = j[key].at("mul").get<double>();
        e.e_add = j[key].at("add").get<double>();
    };
    fill("int8", t.int8);
    fill("fp16", t.fp16);
    fill("fp32", t.fp32);
    return t;
}

int cmd_train(const std::string& task, const std::string& out_path, std::size_t epochs,
              double lr, std::size_t batch, std::size_t n, std::uint64_t data_seed,
              std::uint64_t init_seed, std::uint64_t train_seed, std::size_t threads,
              const std::string& log_path) {
    if (lr <= 0) throw sadnn::ConfigError("train: lr must be positive");
    require_writable(out_path);
    if (!log_path.empty()) require_writable(log_path);

    const sadnn::ModelConfig cfg =
        task == "cls" ? sadnn::toy_cls_config() : sadnn::toy_seg_config();
    sadnn::NetworkGraph g = sadnn::build_model(cfg, init_seed);
    sadnn::Dataset data = make_dataset(task, n, data_seed, cfg);

    std::cout << "task=" << task << " n=" << n << " data_seed=" << data_seed
              << " init_seed=" << init_seed << " train_seed=" << train_seed
              << " lr=" << lr << " batch=" << batch << " threads=" << threads << "\n";

    std::ofstream log;
    if (!log_path.empty()) log.open(log_path, std::ios::trunc);
    if (epochs > 0) {
        sadnn::TrainOptions opt;
        opt.epochs = epochs;
        opt.lr = lr;
        opt.batch_size = batch;
        opt.seed = train_seed;
        opt.threads = threads;
        auto trace = sadnn::train(g, data, opt);
        for (std::size_t e = 0; e < trace.size(); ++e) {
            ordered_json rec{{"epoch", e + 1},
                             {"loss", trace[e].loss},
                             {"metric", trace[e].metric}};
            std::cout << "epoch " << e + 1 << "  loss " << trace[e].loss << "  metric "
                      << trace[e].metric << "\n";
            if (log) log << rec.dump() << "\n";
        }
    }
    sadnn::save_checkpoint(out_path, g);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_quantize(const std::string& in_path, const std::string& out_path,
                 std::size_t calib_n, std::uint64_t calib_seed) {
    require_writable(out_path);
    sadnn::NetworkGraph g = sadnn::load_checkpoint(in_path);
    sadnn::Dataset calib = make_dataset(g.cfg.task, calib_n, calib_seed, g.cfg);
    std::vector<sadnn::Tensor<float>> batches;
    for (std::size_t b = 0; b < calib.size(); b += 8)
        batches.push_back(sadnn::stack_images(calib, b, std::min(calib.size(), b + 8)));
    auto stats = sadnn::calibrate(g, batches);
    sadnn::QuantizedNetwork q = sadnn::quantize_network(g, stats);
    sadnn::save_quantized(out_path, q);
    const auto in_size = std::filesystem::file_size(in_path);
    const auto out_size = std::filesystem::file_size(out_path);
    std::cout << "calib_n=" << calib_n << " calib_seed=" << calib_seed << "\n";
    std::cout << "size ratio int8/fp32 = " << double(out_size) / double(in_size) << " ("
              << out_size << " / " << in_size << " bytes)\n";
    return 0;
}

bool is_quantized_checkpoint(const std::string& path) {
    return sadnn::TensorArchive::load(path).has("__input_qp__");
}

int cmd_eval(const std::string& ckpt, std::size_t n, std::uint64_t seed, bool structured) {
    if (n == 0) throw sadnn::ConfigError("eval: empty test set");
    const bool quant = is_quantized_checkpoint(ckpt);
    sadnn::ModelConfig cfg;
    double metric = 0;
    if (quant) {
        sadnn::QuantizedNetwork q = sadnn::load_quantized(ckpt);
        cfg = q.cfg;
        sadnn::Dataset data = make_dataset(cfg.task, n, seed, cfg);
        sadnn::Tensor<float> batch = sadnn::stack_images(data, 0, data.size());
        sadnn::Tensor<float> out = sadnn::quantized_forward(q, batch);
        if (cfg.task == "cls") {
            const std::size_t nl = out.extent(1);
            std::size_t hits = 0;
            for (std::size_t i = 0; i < data.size(); ++i) {
                bool ok = true;
                for (std::size_t l = 0; l < nl; ++l)
                    ok = ok && (out[i * nl + l] > 0.0f) == (data[i].label[l] > 0.5f);
                hits += ok;
            }
            metric = double(hits) / double(data.size());
        } else {
            const std::size_t per = out.numel() / data.size();
            for (std::size_t i = 0; i < data.size(); ++i) {
                sadnn::Tensor<float> p({per},
                                       std::vector<float>(out.data() + i * per,
                                                          out.data() + (i + 1) * per));
                metric += sadnn::dice_coefficient(p, data[i].label.reshaped({per}));
            }
            metric /= double(data.size());
        }
    } else {
        sadnn::NetworkGraph g = sadnn::load_checkpoint(ckpt);
        cfg = g.cfg;
        sadnn::Dataset data = make_dataset(cfg.task, n, seed, cfg);
        metric = cfg.task == "cls" ? sadnn::subset_accuracy(g, data)
                                   : sadnn::mean_dsc(g, data);
    }
    const char* name = cfg.task == "cls" ? "subset_accuracy" : "mean_dsc";
    if (structured) {
        ordered_json j{{"task", cfg.task}, {"quantized", quant}, {"n", n},
                       {"seed", seed},     {"metric", name},     {"value", metric}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "n=" << n << " seed=" << seed << "\n";
        std::cout << name << " = " << metric << (quant ? " (int8)" : " (fp32)") << "\n";
    }
    return 0;
}

int cmd_analyze(const std::string& spec_path, const std::string& ckpt,
                const std::string& format, bool combined_ops,
                const std::string& table_path) {
    const sadnn::EnergyTable table = load_energy_table(table_path);
    std::uint64_t params = 0;
    sadnn::OpsCount ops;
    if (!spec_path.empty()) {
        std::ifstream is(spec_path);
        if (!is) throw sadnn::IoError("cannot open spec '" + spec_path + "'");
        std::tie(params, ops) = sadnn::analyze_layer_specs(sadnn::parse_layer_specs(is));
    } else if (!ckpt.empty()) {
        sadnn::NetworkGraph g = sadnn::load_checkpoint(ckpt);
        std::tie(params, ops) = sadnn::analyze_graph(g);
    } else {
        throw sadnn::ConfigError("analyze: provide --spec or --checkpoint");
    }
    const sadnn::CostReport report = sadnn::make_report(params, std::move(ops), table);
    if (format == "structured")
        std::cout << sadnn::report_to_json(report).dump(2) << "\n";
    else
        std::cout << sadnn::render_report(report, "human", combined_ops);
    return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& image_path,
                const std::string& out_path) {
    const bool quant = is_quantized_checkpoint(ckpt);
    sadnn::ModelConfig cfg;
    sadnn::NetworkGraph g;
    sadnn::QuantizedNetwork q;
    if (quant) {
        q = sadnn::load_quantized(ckpt);
        cfg = q.cfg;
    } else {
        g = sadnn::load_checkpoint(ckpt);
        cfg = g.cfg;
    }
    sadnn::Tensor<float> img = sadnn::import_pgm(image_path);
    img = resize_nearest(img, cfg.in_h, cfg.in_w);
    sadnn::Tensor<float> x({1, 1, cfg.in_h, cfg.in_w}, std::vector<float>(img.vec()));
    sadnn::Tensor<float> out = quant ? sadnn::quantized_forward(q, x)
                                     : sadnn::forward(g, x);
    if (cfg.task == "cls") {
        std::cout << "per-label scores:";
        for (std::size_t l = 0; l < out.numel(); ++l)
            std::cout << " " << 1.0f / (1.0f + std::exp(-out[l]));
        std::cout << "\n";
    } else {
        if (out_path.empty()) throw sadnn::ConfigError("predict: seg requires --out");
        sadnn::Tensor<float> mask({cfg.in_h, cfg.in_w});
        for (std::size_t i = 0; i < mask.numel(); ++i)
            mask[i] = out[i] > 0.5f ? 1.0f : 0.0f;
        sadnn::export_pgm(out_path, mask);
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_verify(std::size_t threads, const std::string& report_path) {
    sadnn::VerifyReport report = sadnn::run_full_verification(threads);
    std::cout << report.render_table();
    if (!report_path.empty()) {
        std::ofstream os(report_path, std::ios::trunc);
        if (!os) throw sadnn::IoError("cannot open report path '" + report_path + "'");
        os << report.to_json().dump(2) << "\n";
        std::cout << "wrote " << report_path << "\n";
    }
    return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"local self-attention networks with int8 post-training quantization"};
    app.require_subcommand(1);

    std::size_t threads = default_threads();
    app.add_option("--threads", threads, "worker threads (env SADNN_THREADS)");

    // train
    auto* train = app.add_subcommand("train", "train a toy model on synthetic data");
    train->fallthrough();
    std::string task = "cls", out_path = "model.ckpt", log_path;
    std::size_t epochs = 15, batch = 8, n = 256;
    double lr = 4e-3;
    std::uint64_t data_seed = 101, init_seed = 1, train_seed = 7;
    train->add_option("--task", task, "cls or seg")->check(CLI::IsMember({"cls", "seg"}));
    train->add_option("--out", out_path, "checkpoint output path");
    train->add_option("--epochs", epochs, "training epochs (0 writes initial weights)");
    train->add_option("--lr", lr, "Adam learning rate");
    train->add_option("--batch", batch, "batch size");
    train->add_option("--n", n, "synthetic training samples");
    train->add_option("--data-seed", data_seed, "dataset seed");
    train->add_option("--init-seed", init_seed, "weight init seed");
    train->add_option("--train-seed", train_seed, "shuffle seed");
    train->add_option("--log", log_path, "per-epoch metrics log (JSON lines)");

    // quantize
    auto* quantize = app.add_subcommand("quantize", "post-training int8 quantization");
    quantize->fallthrough();
    std::string q_in, q_out = "model.int8.ckpt";
    std::size_t calib_n = 16;
    std::uint64_t calib_seed = 101;
    quantize->add_option("--checkpoint", q_in, "float checkpoint")->required();
    quantize->add_option("--out", q_out, "quantized checkpoint output path");
    quantize->add_option("--calib-n", calib_n, "calibration samples");
    quantize->add_option("--calib-seed", calib_seed, "calibration dataset seed");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on synthetic data");
    eval->fallthrough();
    std::string e_ckpt;
    std::size_t e_n = 64;
    std::uint64_t e_seed = 102;
    bool e_structured = false;
    eval->add_option("--checkpoint", e_ckpt, "float or int8 checkpoint")->required();
    eval->add_option("--n", e_n, "test samples");
    eval->add_option("--seed", e_seed, "dataset seed");
    eval->add_flag("--structured", e_structured, "emit JSON");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "params/ops/size/energy cost report");
    analyze->fallthrough();
    std::string a_spec, a_ckpt, a_format = "human", a_table;
    bool a_combined = false;
    analyze->add_option("--spec", a_spec, "declarative layer spec file");
    analyze->add_option("--checkpoint", a_ckpt, "float checkpoint to analyze");
    analyze->add_option("--format", a_format, "human or structured")
        ->check(CLI::IsMember({"human", "structured"}));
    analyze->add_flag("--combined-ops", a_combined, "also print combined mul+add ops");
    analyze->add_option("--energy-table", a_table, "JSON pJ/op override");

    // predict
    auto* predict = app.add_subcommand("predict", "run inference on a PGM image");
    predict->fallthrough();
    std::string p_ckpt, p_image, p_out;
    predict->add_option("--checkpoint", p_ckpt, "float or int8 checkpoint")->required();
    predict->add_option("--image", p_image, "input PGM (P5)")->required();
    predict->add_option("--out", p_out, "output mask PGM (seg)");

    // verify
    auto* verify = app.add_subcommand("verify", "run the full verification suite");
    verify->fallthrough();
    std::string v_report;
    verify->add_option("--report", v_report, "write the structured report here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train)
            return cmd_train(task, out_path, epochs, lr, batch, n, data_seed, init_seed,
                             train_seed, threads, log_path);
        if (*quantize) return cmd_quantize(q_in, q_out, calib_n, calib_seed);
        if (*eval) return cmd_eval(e_ckpt, e_n, e_seed, e_structured);
        if (*analyze) return cmd_analyze(a_spec, a_ckpt, a_format, a_combined, a_table);
        if (*predict) return cmd_predict(p_ckpt, p_image, p_out);
        if (*verify) return cmd_verify(threads, v_report);
    } catch (const sadnn::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
