#include "doctest.h"
#include "sadnn/models.hpp"
#include "sadnn/quant.hpp"
#include "sadnn/synth.hpp"

using namespace sadnn;

TEST_CASE("qparams: zero is always exactly representable") {
    Rng rng(31);
    for (int i = 0; i < 500; ++i) {
        const QuantParams qp = compute_qparams(rng.uniform(-10, 0), rng.uniform(0, 10));
        CHECK(dequantize_value(std::int8_t(qp.zero_point), qp) == 0.0);
        CHECK(quantize_value(0.0, qp) == qp.zero_point);
        CHECK(qp.zero_point >= -128);
        CHECK(qp.zero_point <= 127);
    }
}

TEST_CASE("qparams: pinned values for standard ranges") {
    // symmetric [-1, 1]: S = 2/255, Z = 0
    const QuantParams a = compute_qparams(-1.0, 1.0);
    CHECK(a.scale == doctest::Approx(2.0 / 255.0));
    CHECK(a.zero_point == 0);
    // one-sided [0, 1]: Z pinned at -128
    const QuantParams b = compute_qparams(0.0, 1.0);
    CHECK(b.scale == doctest::Approx(1.0 / 255.0));
    CHECK(b.zero_point == -128);
    // all-positive range widens to include zero
    const QuantParams c = compute_qparams(0.5, 1.0);
    CHECK(c.scale == doctest::Approx(1.0 / 255.0));
    CHECK(c.zero_point == -128);
    // degenerate
    const QuantParams d = compute_qparams(0.0, 0.0);
    CHECK(d.scale == 1.0);
    CHECK(d.zero_point == 0);
    CHECK_THROWS_AS(compute_qparams(1.0, std::nan("")), NumericError);

    const QuantParams s = compute_qparams_symmetric(0.5);
    CHECK(s.scale == doctest::Approx(0.5 / 127.0));
    CHECK(s.zero_point == 0);
}

TEST_CASE("round-trip error is bounded by half a quantum") {
    Rng rng(32);
    for (int rep = 0; rep < 20; ++rep) {
        const double lo = rng.uniform(-4, 0), hi = rng.uniform(0, 4);
        const QuantParams qp = compute_qparams(lo, hi);
        for (int i = 0; i < 5000; ++i) {
            const double r = rng.uniform(lo, hi);
            const double back = dequantize_value(quantize_value(r, qp), qp);
            CHECK(std::abs(back - r) <= qp.scale / 2 + 1e-15);
        }
    }
}

TEST_CASE("rounding is half-even") {
    const QuantParams qp{1.0, 0};
    CHECK(quantize_value(0.5, qp) == 0);
    CHECK(quantize_value(1.5, qp) == 2);
    CHECK(quantize_value(2.5, qp) == 2);
    CHECK(quantize_value(-0.5, qp) == 0);
    CHECK(quantize_value(-1.5, qp) == -2);
    // saturation
    CHECK(quantize_value(1000.0, qp) == 127);
    CHECK(quantize_value(-1000.0, qp) == -128);
}

TEST_CASE("quantized matmul tracks the float64 reference within one quantum") {
    Rng rng(33);
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t m = 1 + rng.uniform_index(4), k = 1 + rng.uniform_index(8),
                          n = 1 + rng.uniform_index(4);
        Tensor<double> ar({m, k}), br({k, n});
        for (std::size_t i = 0; i < ar.numel(); ++i) ar[i] = rng.uniform(-2, 2);
        for (std::size_t i = 0; i < br.numel(); ++i) br[i] = rng.uniform(-1, 1);
        QuantizedTensor a = quantize_tensor(ar, compute_qparams(-2, 2));
        QuantizedTensor b = quantize_tensor_symmetric(br.cast<float>());
        Tensor<double> ad({m, k}), bd({k, n});
        for (std::size_t i = 0; i < ad.numel(); ++i) ad[i] = dequantize_value(a.data[i], a.qp);
        for (std::size_t i = 0; i < bd.numel(); ++i) bd[i] = dequantize_value(b.data[i], b.qp);
        Tensor<double> ref = matmul(ad, bd);
        double mn = 0, mx = 0;
        for (std::size_t i = 0; i < ref.numel(); ++i) {
            mn = std::min(mn, ref[i]);
            mx = std::max(mx, ref[i]);
        }
        const QuantParams qo = compute_qparams(mn, mx);
        QuantizedTensor got = quantized_matmul(a, b, Tensor<std::int32_t>({0}), qo);
        for (std::size_t i = 0; i < ref.numel(); ++i)
            CHECK(std::abs(int(got.data[i]) - int(quantize_value(ref[i], qo))) <= 1);
    }
}

TEST_CASE("quantized matmul applies the int32 bias at combined scale") {
    // a = [1], b = [1], bias raises the result by exactly bias*S_a*S_b
    QuantizedTensor a{Tensor<std::int8_t>({1, 1}, std::vector<std::int8_t>{100}),
                      {0.01, 0}};
    QuantizedTensor b{Tensor<std::int8_t>({1, 1}, std::vector<std::int8_t>{50}),
                      {0.02, 0}};
    Tensor<std::int32_t> bias({1}, {2000});
    const QuantParams qo{0.05, 0};
    QuantizedTensor y = quantized_matmul(a, b, bias, qo);
    // acc = 100*50 + 2000 = 7000 at scale 2e-4 -> 1.4 real -> 28 at S=0.05
    CHECK(int(y.data[0]) == 28);
}

TEST_CASE("calibration covers all sites and quantize_network is complete") {
    const ModelConfig cfg{"cls", 1, 16, 16, {4}, 3, 8, 3};
    NetworkGraph g = build_model(cfg, 3);
    Dataset data = synth_cls_dataset(8, 91, 16, 16);
    auto stats = calibrate(g, {stack_images(data, 0, 8)});
    CHECK(stats.minmax.count("input") == 1);
    CHECK(stats.minmax.count("node:enc1a.q") == 1);
    CHECK(stats.minmax.count("node:fc2") == 1);

    QuantizedNetwork q = quantize_network(g, stats);
    for (const auto& [name, t] : g.params)
        CHECK((q.weights.count(name) == 1 || q.biases.count(name) == 1));
    CHECK_THROWS_AS(q.site("node:nonexistent"), ConfigError);

    CalibrationStats empty;
    CHECK_THROWS_AS(quantize_network(g, empty), ConfigError);
}

TEST_CASE("quantized forward stays close to the float network") {
    const ModelConfig cfg{"cls", 1, 16, 16, {4}, 3, 8, 3};
    NetworkGraph g = build_model(cfg, 3);
    Dataset data = synth_cls_dataset(16, 92, 16, 16);
    auto stats = calibrate(g, {stack_images(data, 0, 16)});
    QuantizedNetwork q = quantize_network(g, stats);

    Tensor<float> batch = stack_images(data, 0, 16);
    Tensor<float> f = forward(g, batch);
    Tensor<float> qf = quantized_forward(q, batch);
    REQUIRE(f.shape() == qf.shape());
    double worst = 0;
    for (std::size_t i = 0; i < f.numel(); ++i)
        worst = std::max(worst, std::abs(double(f[i]) - double(qf[i])));
    // untrained logits live in a small range; int8 keeps them within a few quanta
    const double limit = 8 * q.site("node:fc2").scale;
    CHECK(worst <= limit);
}

TEST_CASE("quantized segmentation forward produces valid probabilities") {
    const ModelConfig cfg{"seg", 1, 24, 24, {4, 8}, 3, 8, 1};
    NetworkGraph g = build_model(cfg, 4);
    Dataset data = synth_seg_dataset(8, 93, 24, 24);
    auto stats = calibrate(g, {stack_images(data, 0, 8)});
    QuantizedNetwork q = quantize_network(g, stats);
    Tensor<float> out = quantized_forward(q, stack_images(data, 0, 4));
    REQUIRE(out.shape() == std::vector<std::size_t>{4, 1, 24, 24});
    for (std::size_t i = 0; i < out.numel(); ++i) {
        CHECK(out[i] >= 0.0f);
        CHECK(out[i] <= 1.0f);
    }
}

TEST_CASE("quantization is deterministic") {
    const ModelConfig cfg{"cls", 1, 16, 16, {4}, 3, 8, 3};
    NetworkGraph g = build_model(cfg, 3);
    Dataset data = synth_cls_dataset(8, 94, 16, 16);
    auto make = [&] {
        auto stats = calibrate(g, {stack_images(data, 0, 8)});
        return quantize_network(g, stats);
    };
    QuantizedNetwork a = make(), b = make();
    for (const auto& [name, w] : a.weights) {
        const auto& wb = b.weights.at(name);
        CHECK(w.qp == wb.qp);
        for (std::size_t i = 0; i < w.numel(); ++i) CHECK(w.data[i] == wb.data[i]);
    }
    for (const auto& [name, qp] : a.sites) CHECK(qp == b.sites.at(name));
}

TEST_CASE("int32 accumulator overflow is detected") {
    // worst-case int8 products summed past the int32 limit
    const std::size_t k = 140000;  // 140000 * 127 * 127 > 2^31
    QuantizedTensor a{Tensor<std::int8_t>({1, k}, std::int8_t(127)), {1.0, 0}};
    QuantizedTensor b{Tensor<std::int8_t>({k, 1}, std::int8_t(127)), {1.0, 0}};
    CHECK_THROWS_AS(quantized_matmul(a, b, Tensor<std::int32_t>({0}), QuantParams{1.0, 0}),
                    NumericError);
}
