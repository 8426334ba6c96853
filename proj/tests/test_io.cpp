#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sadnn/io.hpp"
#include "sadnn/synth.hpp"

using namespace sadnn;

namespace {

std::string temp_path(const std::string& stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& stem) : path(temp_path(stem)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("archive round-trips every element type bit-exactly") {
    Rng rng(41);
    Tensor<float> f({2, 3});
    Tensor<double> d({4});
    Tensor<std::int32_t> i32({3}, {-7, 0, 2147483647});
    Tensor<std::int8_t> i8({2, 2}, {-128, -1, 0, 127});
    for (std::size_t i = 0; i < f.numel(); ++i) f[i] = float(rng.uniform(-1, 1));
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] = rng.uniform(-1, 1);

    TensorArchive a;
    a.add("f", f);
    a.add("d", d);
    a.add("i32", i32);
    a.add("q", QuantizedTensor{i8, QuantParams{0.03125, -5}});

    std::stringstream ss;
    a.save(ss);
    TensorArchive b = TensorArchive::load(ss);

    Tensor<float> f2 = b.get<float>("f");
    REQUIRE(f2.shape() == f.shape());
    for (std::size_t i = 0; i < f.numel(); ++i) CHECK(f2[i] == f[i]);
    Tensor<double> d2 = b.get<double>("d");
    for (std::size_t i = 0; i < d.numel(); ++i) CHECK(d2[i] == d[i]);
    Tensor<std::int32_t> i2 = b.get<std::int32_t>("i32");
    for (std::size_t i = 0; i < i32.numel(); ++i) CHECK(i2[i] == i32[i]);
    QuantizedTensor q2 = b.get_quantized("q");
    CHECK(q2.qp.scale == 0.03125);
    CHECK(q2.qp.zero_point == -5);
    for (std::size_t i = 0; i < i8.numel(); ++i) CHECK(q2.data[i] == i8[i]);

    // type and presence guards
    CHECK_THROWS_AS(b.get<double>("f"), IoError);
    CHECK_THROWS_AS(b.get_quantized("f"), IoError);
    CHECK_THROWS_AS(b.get<float>("missing"), IoError);
    CHECK(b.has("f"));
    CHECK_FALSE(b.has("missing"));
}

TEST_CASE("archive load rejects corrupt input with distinct errors") {
    TensorArchive a;
    a.add("t", Tensor<float>({8}, 1.0f));
    std::stringstream ss;
    a.save(ss);
    const std::string bytes = ss.str();

    {
        std::stringstream bad(std::string("JUNK") + bytes.substr(4));
        CHECK_THROWS_WITH_AS(TensorArchive::load(bad), doctest::Contains("bad magic"),
                             IoError);
    }
    {
        std::string v = bytes;
        v[4] = 9;  // bump the version field
        std::stringstream bad(v);
        CHECK_THROWS_WITH_AS(TensorArchive::load(bad),
                             doctest::Contains("unsupported archive version"), IoError);
    }
    {
        std::stringstream bad(bytes.substr(0, bytes.size() - 5));
        CHECK_THROWS_WITH_AS(TensorArchive::load(bad), doctest::Contains("truncated"),
                             IoError);
    }
}

TEST_CASE("float checkpoint round-trips bit-exactly") {
    TempFile tf("sadnn_test_ckpt.bin");
    const ModelConfig cfg{"cls", 1, 16, 16, {4}, 3, 8, 3};
    NetworkGraph g = build_model(cfg, 5);
    save_checkpoint(tf.path, g);
    NetworkGraph h = load_checkpoint(tf.path);
    CHECK(h.cfg.task == "cls");
    CHECK(h.cfg.channels == cfg.channels);
    for (const auto& [name, t] : g.params) {
        const auto& u = h.param(name);
        REQUIRE(u.shape() == t.shape());
        for (std::size_t i = 0; i < t.numel(); ++i) CHECK(u[i] == t[i]);
    }
}

TEST_CASE("quantized checkpoint round-trips bit-exactly") {
    TempFile tf("sadnn_test_qckpt.bin");
    const ModelConfig cfg{"cls", 1, 16, 16, {4}, 3, 8, 3};
    NetworkGraph g = build_model(cfg, 5);
    Dataset data = synth_cls_dataset(8, 61, 16, 16);
    QuantizedNetwork q = quantize_network(g, calibrate(g, {stack_images(data, 0, 8)}));
    save_quantized(tf.path, q);
    QuantizedNetwork r = load_quantized(tf.path);

    CHECK(r.input_qp == q.input_qp);
    REQUIRE(r.weights.size() == q.weights.size());
    for (const auto& [name, w] : q.weights) {
        const auto& v = r.weights.at(name);
        CHECK(v.qp == w.qp);
        for (std::size_t i = 0; i < w.numel(); ++i) CHECK(v.data[i] == w.data[i]);
    }
    REQUIRE(r.biases.size() == q.biases.size());
    for (const auto& [name, b] : q.biases) {
        const auto& v = r.biases.at(name);
        for (std::size_t i = 0; i < b.numel(); ++i) CHECK(v[i] == b[i]);
    }
    CHECK(r.sites == q.sites);

    // identical inference from the reloaded network
    Tensor<float> batch = stack_images(data, 0, 4);
    Tensor<float> y1 = quantized_forward(q, batch);
    Tensor<float> y2 = quantized_forward(r, batch);
    for (std::size_t i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("checkpoint loaders reject the wrong flavor") {
    TempFile tf("sadnn_test_flavor.bin");
    const ModelConfig cfg{"cls", 1, 16, 16, {4}, 3, 8, 3};
    NetworkGraph g = build_model(cfg, 5);
    save_checkpoint(tf.path, g);
    CHECK_THROWS_WITH_AS(load_quantized(tf.path), doctest::Contains("float checkpoint"),
                         IoError);

    Dataset data = synth_cls_dataset(8, 62, 16, 16);
    QuantizedNetwork q = quantize_network(g, calibrate(g, {stack_images(data, 0, 8)}));
    save_quantized(tf.path, q);
    CHECK_THROWS_WITH_AS(load_checkpoint(tf.path),
                         doctest::Contains("quantized checkpoint"), IoError);
}

TEST_CASE("pgm import: 8-bit grayscale with comments") {
    TempFile tf("sadnn_test8.pgm");
    {
        std::ofstream os(tf.path, std::ios::binary);
        os << "P5\n# a comment\n4 2\n255\n";
        for (int v : {0, 51, 102, 153, 204, 255, 128, 64}) os.put(char(v));
    }
    Tensor<float> img = import_pgm(tf.path);
    REQUIRE(img.shape() == std::vector<std::size_t>{1, 2, 4});
    CHECK(img[0] == 0.0f);
    CHECK(img[1] == doctest::Approx(51.0 / 255.0));
    CHECK(img[5] == 1.0f);
    CHECK(img[7] == doctest::Approx(64.0 / 255.0));
}

TEST_CASE("pgm import: 16-bit big-endian samples") {
    TempFile tf("sadnn_test16.pgm");
    {
        std::ofstream os(tf.path, std::ios::binary);
        os << "P5\n1 2\n65535\n";
        // 0x0000 = 0.0, 0xFFFF = 1.0
        os.put(0).put(0).put(char(0xFF)).put(char(0xFF));
    }
    Tensor<float> img = import_pgm(tf.path);
    REQUIRE(img.shape() == std::vector<std::size_t>{1, 2, 1});
    CHECK(img[0] == 0.0f);
    CHECK(img[1] == 1.0f);
}

TEST_CASE("pgm import rejects malformed files") {
    TempFile tf("sadnn_test_bad.pgm");
    {
        std::ofstream os(tf.path, std::ios::binary);
        os << "P2\n2 2\n255\n0 0 0 0\n";  // ascii variant unsupported
    }
    CHECK_THROWS_AS(import_pgm(tf.path), IoError);
    {
        std::ofstream os(tf.path, std::ios::binary);
        os << "P5\n2 2\n255\n";
        os.put(char(1));  // only 1 of 4 pixels
    }
    CHECK_THROWS_WITH_AS(import_pgm(tf.path), doctest::Contains("truncated"), IoError);
    CHECK_THROWS_AS(import_pgm(temp_path("sadnn_no_such_file.pgm")), IoError);
}

TEST_CASE("pgm export/import round-trip") {
    TempFile tf("sadnn_test_rt.pgm");
    Tensor<float> img({1, 3, 5});
    for (std::size_t i = 0; i < img.numel(); ++i)
        img[i] = float(i) / float(img.numel() - 1);
    export_pgm(tf.path, img);
    Tensor<float> back = import_pgm(tf.path);
    REQUIRE(back.shape() == img.shape());
    // 8-bit storage quantizes to 1/255 resolution
    for (std::size_t i = 0; i < img.numel(); ++i)
        CHECK(std::abs(back[i] - img[i]) <= 0.5f / 255.0f + 1e-6f);

    CHECK_THROWS_AS(export_pgm(tf.path, Tensor<float>({2, 3, 5})), ShapeError);
}
