#include <cmath>

#include "doctest.h"
#include "sadnn/tensor.hpp"

using namespace sadnn;

TEST_CASE("tensor shape bookkeeping") {
    Tensor<float> t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.rank() == 3);
    CHECK(t.extent(1) == 3);
    for (std::size_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0f);

    CHECK_THROWS_AS(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(t.reshaped({5, 5}), ShapeError);
    CHECK(t.reshaped({4, 6}).extent(0) == 4);
}

TEST_CASE("matmul against a float64 triple-loop oracle") {
    Rng rng(1);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t m = 1 + rng.uniform_index(5), k = 1 + rng.uniform_index(5),
                          n = 1 + rng.uniform_index(5);
        Tensor<double> a({m, k}), b({k, n});
        for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.uniform(-2, 2);
        for (std::size_t i = 0; i < b.numel(); ++i) b[i] = rng.uniform(-2, 2);
        Tensor<double> got = matmul(a, b);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0;
                for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
                CHECK(got[i * n + j] == doctest::Approx(acc).epsilon(1e-12));
            }
    }
    CHECK_THROWS_AS(matmul(Tensor<double>({2, 3}), Tensor<double>({2, 3})), ShapeError);
}

TEST_CASE("softmax properties and oracle") {
    Rng rng(2);
    Tensor<double> x({3, 5});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-4, 4);
    Tensor<double> y = softmax(x, 1);

    for (std::size_t r = 0; r < 3; ++r) {
        double sum = 0, ref_sum = 0;
        for (std::size_t c = 0; c < 5; ++c) {
            sum += y[r * 5 + c];
            ref_sum += std::exp(x[r * 5 + c]);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t c = 0; c < 5; ++c)
            CHECK(y[r * 5 + c] ==
                  doctest::Approx(std::exp(x[r * 5 + c]) / ref_sum).epsilon(1e-12));
    }

    // shift invariance: adding a constant per row changes nothing
    Tensor<double> shifted = x;
    for (std::size_t i = 0; i < shifted.numel(); ++i) shifted[i] += 7.5;
    Tensor<double> y2 = softmax(shifted, 1);
    for (std::size_t i = 0; i < y.numel(); ++i)
        CHECK(y2[i] == doctest::Approx(y[i]).epsilon(1e-12));

    // large logits stay finite thanks to max subtraction
    Tensor<double> big({1, 3}, {1000.0, 1001.0, 999.0});
    CHECK(all_finite(softmax(big, 1)));
}

TEST_CASE("concat and slice are inverses") {
    Rng rng(3);
    Tensor<float> a({2, 3, 2, 2}), b({2, 5, 2, 2});
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] = float(rng.uniform(-1, 1));
    for (std::size_t i = 0; i < b.numel(); ++i) b[i] = float(rng.uniform(-1, 1));
    Tensor<float> c = concat<float>({a, b}, 1);
    CHECK(c.extent(1) == 8);
    Tensor<float> a2 = slice(c, 1, 0, 3), b2 = slice(c, 1, 3, 8);
    REQUIRE(a2.shape() == a.shape());
    REQUIRE(b2.shape() == b.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a2[i] == a[i]);
    for (std::size_t i = 0; i < b.numel(); ++i) CHECK(b2[i] == b[i]);

    CHECK_THROWS_AS(concat<float>({a, Tensor<float>({2, 3, 2, 3})}, 1), ShapeError);
    CHECK_THROWS_AS(slice(c, 1, 5, 9), ShapeError);
}

TEST_CASE("elementwise helpers") {
    Tensor<double> a({3}, {1, -2, 3}), b({3}, {4, 5, -6});
    CHECK(add(a, b)[1] == 3.0);
    CHECK(sub(a, b)[2] == 9.0);
    CHECK(mul(a, b)[0] == 4.0);
    CHECK(scale(a, 2.0)[2] == 6.0);
    CHECK(relu(a)[1] == 0.0);
    CHECK(sigmoid(Tensor<double>({1}, {0.0}))[0] == doctest::Approx(0.5));
    CHECK_THROWS_AS(add(a, Tensor<double>({4})), ShapeError);

    Tensor<double> bad({2}, {1.0, std::nan("")});
    CHECK_FALSE(all_finite(bad));
    CHECK(all_finite(a));
}

TEST_CASE("deterministic rng stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(43);
    CHECK(Rng(42).next_u64() != c.next_u64());
    Rng d(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = d.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(d.uniform_index(5) < 5);
    }
}
