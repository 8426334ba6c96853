#include "doctest.h"
#include "sadnn/attention.hpp"

using namespace sadnn;

namespace {

AttentionWeights<double> random_weights(const AttentionSpec& spec, Rng& rng) {
    auto w = AttentionWeights<double>::zeros(spec);
    for (auto* m : {&w.w_q, &w.w_k, &w.w_v, &w.e_row, &w.e_col})
        for (std::size_t i = 0; i < m->numel(); ++i) (*m)[i] = rng.uniform(-1, 1);
    return w;
}

Tensor<double> random_input(const AttentionSpec& spec, std::size_t n, std::size_t h,
                            std::size_t w, Rng& rng) {
    Tensor<double> x({n, spec.c_in, h, w});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1, 1);
    return x;
}

// Literal per-pixel definition: q = W_Q x_ij; k'_ab = W_K x_ab + e(a,b);
// y_ij = sum softmax_ab(q . k'_ab) W_V x_ab, zero activations outside.
Tensor<double> oracle(const Tensor<double>& x, const AttentionSpec& spec,
                      const AttentionWeights<double>& w) {
    const Shape4 s = x.shape4();
    const std::size_t c = spec.c_out, half = c / 2;
    const long rh = long(spec.window_h / 2), rw = long(spec.window_w / 2);
    Tensor<double> y({s.n, c, s.h, s.w});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t i = 0; i < s.h; ++i)
            for (std::size_t j = 0; j < s.w; ++j) {
                std::vector<double> q(c, 0);
                for (std::size_t co = 0; co < c; ++co)
                    for (std::size_t ci = 0; ci < s.c; ++ci)
                        q[co] += w.w_q[co * s.c + ci] * x.at4(n, ci, i, j);
                std::vector<double> logit;
                std::vector<std::vector<double>> vals;
                for (long a = -rh; a <= rh; ++a)
                    for (long b = -rw; b <= rw; ++b) {
                        const long si = long(i) + a, sj = long(j) + b;
                        const bool inb =
                            si >= 0 && si < long(s.h) && sj >= 0 && sj < long(s.w);
                        std::vector<double> k(c, 0), v(c, 0);
                        if (inb)
                            for (std::size_t co = 0; co < c; ++co)
                                for (std::size_t ci = 0; ci < s.c; ++ci) {
                                    const double xv =
                                        x.at4(n, ci, std::size_t(si), std::size_t(sj));
                                    k[co] += w.w_k[co * s.c + ci] * xv;
                                    v[co] += w.w_v[co * s.c + ci] * xv;
                                }
                        double l = 0;
                        for (std::size_t co = 0; co < c; ++co) {
                            const double e =
                                co < half
                                    ? w.e_col[co * spec.window_w + std::size_t(b + rw)]
                                    : w.e_row[(co - half) * spec.window_h +
                                              std::size_t(a + rh)];
                            l += q[co] * (k[co] + e);
                        }
                        logit.push_back(l);
                        vals.push_back(std::move(v));
                    }
                double mx = logit[0], z = 0;
                for (double l : logit) mx = std::max(mx, l);
                std::vector<double> p;
                for (double l : logit) {
                    p.push_back(std::exp(l - mx));
                    z += p.back();
                }
                for (std::size_t t = 0; t < p.size(); ++t)
                    for (std::size_t co = 0; co < c; ++co)
                        y.at4(n, co, i, j) += p[t] / z * vals[t][co];
            }
    return y;
}

}  // namespace

TEST_CASE("extract_local_regions gathers windows with zero padding") {
    AttentionSpec spec{1, 2, 3, 3, PadMode::zero};
    Tensor<double> x({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor<double> r = extract_local_regions(x, spec);
    REQUIRE(r.shape() == std::vector<std::size_t>{1, 2, 2, 1, 3, 3});
    // window centered at (0,0): only (0..1, 0..1) in bounds
    const double want00[9] = {0, 0, 0, 0, 1, 2, 0, 3, 4};
    for (int i = 0; i < 9; ++i) CHECK(r[i] == want00[i]);
    // centered at (1,1)
    const double want11[9] = {1, 2, 0, 3, 4, 0, 0, 0, 0};
    for (int i = 0; i < 9; ++i) CHECK(r[3 * 9 + i] == want11[i]);
}

TEST_CASE("extract_local_regions wrap mode is circular") {
    AttentionSpec spec{1, 2, 3, 3, PadMode::wrap};
    Tensor<double> x({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor<double> r = extract_local_regions(x, spec);
    // at (0,0), offset (-1,-1) wraps to (1,1) = 4
    CHECK(r[0] == 4.0);
    // no zeros anywhere under wrap
    for (std::size_t i = 0; i < r.numel(); ++i) CHECK(r[i] != 0.0);
}

TEST_CASE("relative embedding targets the right half, offset, and channel") {
    // keys: 1 pixel, c=4, 3x3 window, all zero — output equals the embedding
    Tensor<double> keys({1, 1, 1, 4, 3, 3});
    Tensor<double> e_row({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor<double> e_col({2, 3}, {10, 20, 30, 40, 50, 60});
    Tensor<double> out = add_relative_embedding(keys, e_row, e_col);
    for (std::size_t u = 0; u < 3; ++u)
        for (std::size_t v = 0; v < 3; ++v) {
            CHECK(out[(0 * 3 + u) * 3 + v] == e_col[v]);          // ch 0: col table row 0
            CHECK(out[(1 * 3 + u) * 3 + v] == e_col[3 + v]);      // ch 1: col table row 1
            CHECK(out[(2 * 3 + u) * 3 + v] == e_row[u]);          // ch 2: row table row 0
            CHECK(out[(3 * 3 + u) * 3 + v] == e_row[3 + u]);      // ch 3: row table row 1
        }
    CHECK_THROWS_AS(add_relative_embedding(keys, e_row, Tensor<double>({2, 5})),
                    ShapeError);
}

TEST_CASE("attention forward matches the literal oracle") {
    Rng rng(7);
    for (int rep = 0; rep < 10; ++rep) {
        AttentionSpec spec;
        spec.c_in = 1 + rng.uniform_index(3);
        spec.c_out = 2 + 2 * rng.uniform_index(3);
        spec.window_h = spec.window_w = 2 * rng.uniform_index(3) + 1;
        auto w = random_weights(spec, rng);
        Tensor<double> x = random_input(spec, 1, 3 + rng.uniform_index(3),
                                        3 + rng.uniform_index(3), rng);
        Tensor<double> got = attention_forward(x, spec, w);
        Tensor<double> want = oracle(x, spec, w);
        REQUIRE(got.shape() == want.shape());
        for (std::size_t i = 0; i < got.numel(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
    }
}

TEST_CASE("odd output width splits key halves floor/ceil") {
    AttentionSpec spec{2, 3, 3, 3, PadMode::zero};
    Rng rng(9);
    auto w = random_weights(spec, rng);
    CHECK(w.e_col.extent(0) == 1);
    CHECK(w.e_row.extent(0) == 2);
    Tensor<double> x = random_input(spec, 1, 4, 4, rng);
    Tensor<double> got = attention_forward(x, spec, w);
    Tensor<double> want = oracle(x, spec, w);
    for (std::size_t i = 0; i < got.numel(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
    CHECK(attention_param_count(spec) == 3 * 3 * 2 + 1 * 3 + 2 * 3);
}

TEST_CASE("1x1 window degenerates to the value projection exactly") {
    AttentionSpec spec{3, 4, 1, 1, PadMode::zero};
    Rng rng(11);
    auto w = random_weights(spec, rng);
    Tensor<double> x = random_input(spec, 2, 3, 5, rng);
    Tensor<double> got = attention_forward(x, spec, w);
    Tensor<double> want = detail::project_pixels(x, w.w_v);
    for (std::size_t i = 0; i < got.numel(); ++i) CHECK(got[i] == want[i]);
}

TEST_CASE("wrap padding gives circular shift equivariance") {
    AttentionSpec spec{2, 4, 3, 3, PadMode::wrap};
    Rng rng(13);
    auto w = random_weights(spec, rng);
    Tensor<double> x = random_input(spec, 1, 5, 6, rng);
    Tensor<double> y = attention_forward(x, spec, w);

    // shift input by (1,2) circularly; output must shift identically
    Tensor<double> xs(x.shape());
    const Shape4 s = x.shape4();
    for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t i = 0; i < s.h; ++i)
            for (std::size_t j = 0; j < s.w; ++j)
                xs.at4(0, c, (i + 1) % s.h, (j + 2) % s.w) = x.at4(0, c, i, j);
    Tensor<double> ys = attention_forward(xs, spec, w);
    for (std::size_t c = 0; c < spec.c_out; ++c)
        for (std::size_t i = 0; i < s.h; ++i)
            for (std::size_t j = 0; j < s.w; ++j)
                CHECK(ys.at4(0, c, (i + 1) % s.h, (j + 2) % s.w) ==
                      doctest::Approx(y.at4(0, c, i, j)).epsilon(1e-12));
}

TEST_CASE("op counter equals the closed-form 2*b^2*c") {
    Rng rng(17);
    for (std::size_t b : {1, 3, 5, 7})
        for (std::size_t c : {1, 4, 8}) {
            AttentionSpec spec{2, c, b, b, PadMode::zero};
            auto w = random_weights(spec, rng);
            const std::size_t h = 4, wd = 6;
            Tensor<double> x = random_input(spec, 1, h, wd, rng);
            OpCounter counter;
            attention_forward(x, spec, w, static_cast<AttentionCache<double>*>(nullptr),
                              &counter);
            const auto oc = attention_op_count(spec, h, wd);
            CHECK(oc.mul_per_pixel == 2 * b * b * c);
            CHECK(counter.mul == oc.mul_total);
            CHECK(counter.add == oc.add_total);
        }
}

TEST_CASE("attention validation errors") {
    AttentionSpec even_window{2, 4, 2, 3, PadMode::zero};
    CHECK_THROWS_AS(even_window.validate(), ConfigError);
    AttentionSpec ok{2, 4, 3, 3, PadMode::zero};
    Rng rng(1);
    auto w = random_weights(ok, rng);
    Tensor<double> wrong_c({1, 3, 4, 4});
    CHECK_THROWS_AS(attention_forward(wrong_c, ok, w), ShapeError);

    // non-finite activations are flagged with the layer name
    Tensor<double> x({1, 2, 2, 2}, std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(attention_forward(x, ok, w), NumericError);
}

TEST_CASE("attention param count formula") {
    AttentionSpec s{8, 16, 5, 3, PadMode::zero};
    // 3*16*8 + 8*3 (col) + 8*5 (row)
    CHECK(attention_param_count(s) == 384 + 24 + 40);
}
