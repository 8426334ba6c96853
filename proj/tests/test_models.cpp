#include "doctest.h"
#include "sadnn/models.hpp"
#include "sadnn/synth.hpp"

using namespace sadnn;

TEST_CASE("classification graph shapes") {
    NetworkGraph g = build_sadnn_cls(toy_cls_config(), 1);
    g.validate(2);
    const auto& out = g.nodes[std::size_t(g.output)];
    CHECK(out.out_shape == std::vector<std::size_t>{2, 3});
    // encoder halves spatial dims per stage: 32 -> 16 -> 8 -> 4
    for (const auto& n : g.nodes)
        if (n.name == "pool3") CHECK(n.out_shape == std::vector<std::size_t>{2, 32, 4, 4});
}

TEST_CASE("segmentation graph shapes and skip wiring") {
    NetworkGraph g = build_sadnn_seg(toy_seg_config(), 1);
    g.validate(1);
    const auto& out = g.nodes[std::size_t(g.output)];
    CHECK(out.out_shape == std::vector<std::size_t>{1, 1, 32, 32});
    for (const auto& n : g.nodes) {
        if (n.kind == LayerKind::maxunpool) {
            REQUIRE(n.unpool_src >= 0);
            CHECK(g.nodes[std::size_t(n.unpool_src)].kind == LayerKind::maxpool);
        }
        if (n.kind == LayerKind::concat) CHECK(n.inputs.size() == 2);
    }
}

TEST_CASE("config validation rejects bad geometry") {
    ModelConfig bad = toy_cls_config();
    bad.window = 4;
    CHECK_THROWS_AS(check_config(bad), ConfigError);
    bad = toy_cls_config();
    bad.channels = {8, 7};
    CHECK_THROWS_AS(check_config(bad), ConfigError);
    bad = toy_cls_config();
    bad.in_h = 30;  // not divisible through 3 pooling stages
    CHECK_THROWS_AS(check_config(bad), ConfigError);
    CHECK_THROWS_AS(build_model(ModelConfig{"foo", 1, 32, 32, {8}, 3, 8, 2}), ConfigError);
}

TEST_CASE("model config round-trips through the int record") {
    for (const ModelConfig& cfg : {toy_cls_config(), toy_seg_config()}) {
        const ModelConfig back = decode_config(encode_config(cfg));
        CHECK(back.task == cfg.task);
        CHECK(back.in_h == cfg.in_h);
        CHECK(back.channels == cfg.channels);
        CHECK(back.head_width == cfg.head_width);
        CHECK(back.num_classes == cfg.num_classes);
    }
    CHECK_THROWS_AS(decode_config(Tensor<std::int32_t>({3})), IoError);
}

TEST_CASE("initialization is deterministic per seed") {
    NetworkGraph a = build_model(toy_cls_config(), 9);
    NetworkGraph b = build_model(toy_cls_config(), 9);
    NetworkGraph c = build_model(toy_cls_config(), 10);
    bool all_equal = true, any_diff = false;
    for (const auto& [name, t] : a.params) {
        const auto& tb = b.param(name);
        const auto& tc = c.param(name);
        for (std::size_t i = 0; i < t.numel(); ++i) {
            all_equal = all_equal && t[i] == tb[i];
            any_diff = any_diff || t[i] != tc[i];
        }
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("metrics: subset accuracy and dice coefficient") {
    Tensor<float> pred({4}, {0.9f, 0.2f, 0.7f, 0.1f});
    Tensor<float> truth({4}, {1.f, 0.f, 1.f, 0.f});
    CHECK(dice_coefficient(pred, truth) == doctest::Approx(1.0));
    Tensor<float> miss({4}, {0.f, 1.f, 0.f, 1.f});
    CHECK(dice_coefficient(miss, truth) == doctest::Approx(0.0));
    Tensor<float> none({4}, 0.0f);
    Tensor<float> empty({4}, 0.0f);
    CHECK(dice_coefficient(none, empty) == doctest::Approx(1.0));  // both empty
    // half overlap: pred {0,1}, truth {1,1} -> 2*1/(1+2)
    Tensor<float> h1({2}, {0.1f, 0.9f}), h2({2}, {1.f, 1.f});
    CHECK(dice_coefficient(h1, h2) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("training is deterministic and thread-count independent") {
    const ModelConfig cfg{"cls", 1, 16, 16, {4}, 3, 8, 3};
    Dataset data = synth_cls_dataset(8, 55, 16, 16);
    TrainOptions opt;
    opt.epochs = 2;
    opt.lr = 1e-3;
    opt.batch_size = 4;
    opt.seed = 3;

    auto run = [&](std::size_t threads) {
        NetworkGraph g = build_model(cfg, 2);
        opt.threads = threads;
        train(g, data, opt);
        return g;
    };
    NetworkGraph g1 = run(1), g2 = run(1), g4 = run(4);
    for (const auto& [name, t] : g1.params) {
        const auto& b = g2.param(name);
        const auto& c = g4.param(name);
        for (std::size_t i = 0; i < t.numel(); ++i) {
            CHECK(t[i] == b[i]);
            CHECK(t[i] == c[i]);
        }
    }
}

TEST_CASE("training reduces the loss on a tiny problem") {
    const ModelConfig cfg{"cls", 1, 16, 16, {4}, 3, 8, 3};
    NetworkGraph g = build_model(cfg, 2);
    Dataset data = synth_cls_dataset(16, 77, 16, 16);
    TrainOptions opt;
    opt.epochs = 5;
    opt.lr = 2e-3;
    opt.batch_size = 8;
    opt.seed = 3;
    auto trace = train(g, data, opt);
    REQUIRE(trace.size() == 5);
    CHECK(trace.back().loss < trace.front().loss);
}

TEST_CASE("train rejects an empty dataset") {
    NetworkGraph g = build_model(toy_cls_config());
    CHECK_THROWS_AS(train(g, Dataset{}, TrainOptions{}), ConfigError);
    CHECK_THROWS_AS(subset_accuracy(g, Dataset{}), ConfigError);
}
