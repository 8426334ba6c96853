#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sadnn/attention.hpp"
#include "sadnn/layers.hpp"
#include "sadnn/tensor.hpp"

namespace sadnn {

// Append-only tape for reverse-mode differentiation. Each op records its
// output and a closure mapping the output gradient to input gradients;
// backward() walks the tape in reverse order exactly once.
template <class T>
class Tape {
public:
    using Id = int;

    struct Node {
        std::string op;
        std::vector<Id> inputs;
        Tensor<T> value;
        std::function<void(Tape&)> backward_fn;  // reads grad of self, accumulates into inputs
        Id self = -1;
    };

    Id leaf(Tensor<T> v, std::string name = "leaf") {
        return push(std::move(name), {}, std::move(v), nullptr);
    }

    const Tensor<T>& value(Id id) const { return nodes_.at(std::size_t(id)).value; }
    std::size_t size() const { return nodes_.size(); }

    // ---- ops ----

    Id matmul(Id a, Id b) {
        Tensor<T> y = sadnn::matmul(value(a), value(b));
        return push("matmul", {a, b}, std::move(y), [a, b](Tape& t) {
            const auto& g = t.grad_of(t.cursor_);
            const auto& av = t.value(a);
            const auto& bv = t.value(b);
            // dA = G B^T, dB = A^T G
            const std::size_t m = av.extent(0), k = av.extent(1), n = bv.extent(1);
            Tensor<T> da({m, k}), db({k, n});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const T gij = g[i * n + j];
                    for (std::size_t p = 0; p < k; ++p) {
                        da[i * k + p] += gij * bv[p * n + j];
                        db[p * n + j] += av[i * k + p] * gij;
                    }
                }
            t.accum(a, da);
            t.accum(b, db);
        });
    }

    Id add(Id a, Id b) {
        Tensor<T> y = sadnn::add(value(a), value(b));
        return push("add", {a, b}, std::move(y), [a, b](Tape& t) {
            t.accum(a, t.grad_of(t.cursor_));
            t.accum(b, t.grad_of(t.cursor_));
        });
    }

    Id sub(Id a, Id b) {
        Tensor<T> y = sadnn::sub(value(a), value(b));
        return push("sub", {a, b}, std::move(y), [a, b](Tape& t) {
            const auto& g = t.grad_of(t.cursor_);
            t.accum(a, g);
            t.accum(b, sadnn::scale(g, T{-1}));
        });
    }

    Id mul(Id a, Id b) {
        Tensor<T> y = sadnn::mul(value(a), value(b));
        return push("mul", {a, b}, std::move(y), [a, b](Tape& t) {
            const auto& g = t.grad_of(t.cursor_);
            t.accum(a, sadnn::mul(g, t.value(b)));
            t.accum(b, sadnn::mul(g, t.value(a)));
        });
    }

    Id scale(Id a, T s) {
        Tensor<T> y = sadnn::scale(value(a), s);
        return push("scale", {a}, std::move(y), [a, s](Tape& t) {
            t.accum(a, sadnn::scale(t.grad_of(t.cursor_), s));
        });
    }

    Id relu(Id a) {
        Tensor<T> y = sadnn::relu(value(a));
        return push("relu", {a}, std::move(y), [a](Tape& t) {
            const auto& g = t.grad_of(t.cursor_);
            const auto& x = t.value(a);
            Tensor<T> dx(x.shape());
            for (std::size_t i = 0; i < x.numel(); ++i)
                dx[i] = x[i] > T{0} ? g[i] : T{0};
            t.accum(a, dx);
        });
    }

    Id sigmoid(Id a) {
        Tensor<T> y = sadnn::sigmoid(value(a));
        return push("sigmoid", {a}, std::move(y), [a](Tape& t) {
            const auto& g = t.grad_of(t.cursor_);
            const auto& y2 = t.value(t.cursor_);
            Tensor<T> dx(y2.shape());
            for (std::size_t i = 0; i < y2.numel(); ++i)
                dx[i] = g[i] * y2[i] * (T{1} - y2[i]);
            t.accum(a, dx);
        });
    }

    Id softmax(Id a, std::size_t axis) {
        Tensor<T> y = sadnn::softmax(value(a), axis);
        return push("softmax", {a}, std::move(y), [a, axis](Tape& t) {
            const auto& g = t.grad_of(t.cursor_);
            const auto& y2 = t.value(t.cursor_);
            const auto& shape = y2.shape();
            std::size_t axis_len = shape[axis], inner = 1;
            for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
            std::size_t outer = y2.numel() / (axis_len * inner);
            Tensor<T> dx(shape);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * axis_len * inner + in;
                    T dot{0};
                    for (std::size_t k = 0; k < axis_len; ++k)
                        dot += g[base + k * inner] * y2[base + k * inner];
                    for (std::size_t k = 0; k < axis_len; ++k)
                        dx[base + k * inner] =
                            y2[base + k * inner] * (g[base + k * inner] - dot);
                }
            t.accum(a, dx);
        });
    }

    Id concat(const std::vector<Id>& xs, std::size_t axis) {
        std::vector<Tensor<T>> vals;
        for (Id x : xs) vals.push_back(value(x));
        Tensor<T> y = sadnn::concat(vals, axis);
        return push("concat", xs, std::move(y), [xs, axis](Tape& t) {
            const auto& g = t.grad_of(t.cursor_);
            std::size_t off = 0;
            for (Id x : xs) {
                const std::size_t ext = t.value(x).shape()[axis];
                t.accum(x, sadnn::slice(g, axis, off, off + ext));
                off += ext;
            }
        });
    }

    Id reshape(Id a, std::vector<std::size_t> new_shape) {
        Tensor<T> y = value(a).reshaped(new_shape);
        return push("reshape", {a}, std::move(y), [a](Tape& t) {
            t.accum(a, t.grad_of(t.cursor_).reshaped(t.value(a).shape()));
        });
    }

    Id sum(Id a) {
        T s{0};
        for (std::size_t i = 0; i < value(a).numel(); ++i) s += value(a)[i];
        return push("sum", {a}, Tensor<T>({1}, {s}), [a](Tape& t) {
            const T g = t.grad_of(t.cursor_)[0];
            t.accum(a, Tensor<T>(t.value(a).shape(), g));
        });
    }

    Id attention(Id x, Id wq, Id wk, Id wv, Id erow, Id ecol, const AttentionSpec& spec,
                 OpCounter* counter = nullptr, const std::string& name = "attention") {
        AttentionWeights<T> w;
        w.w_q = value(wq);
        w.w_k = value(wk);
        w.w_v = value(wv);
        w.e_row = value(erow);
        w.e_col = value(ecol);
        auto cache = std::make_shared<AttentionCache<T>>();
        Tensor<T> y = attention_forward(value(x), spec, w, cache.get(), counter, name);
        return push(name, {x, wq, wk, wv, erow, ecol}, std::move(y),
                    [x, wq, wk, wv, erow, ecol, spec, cache](Tape& t) {
                        AttentionWeights<T> w2;
                        w2.w_q = t.value(wq);
                        w2.w_k = t.value(wk);
                        w2.w_v = t.value(wv);
                        w2.e_row = t.value(erow);
                        w2.e_col = t.value(ecol);
                        auto g = attention_backward(t.value(x), spec, w2, *cache,
                                                    t.grad_of(t.cursor_));
                        t.accum(x, g.dx);
                        t.accum(wq, g.dw_q);
                        t.accum(wk, g.dw_k);
                        t.accum(wv, g.dw_v);
                        t.accum(erow, g.de_row);
                        t.accum(ecol, g.de_col);
                    });
    }

    Id maxpool(Id x, std::size_t k, std::size_t stride,
               const std::string& name = "maxpool") {
        auto r = maxpool2d(value(x), k, stride, name);
        auto indices = std::make_shared<PoolIndices>(std::move(r.indices));
        Id id = push(name, {x}, std::move(r.y), [x, indices](Tape& t) {
            t.accum(x, maxpool2d_backward(t.grad_of(t.cursor_), *indices));
        });
        pool_indices_[id] = indices;
        return id;
    }

    Id maxunpool(Id y, Id pool_node, const std::string& name = "maxunpool") {
        auto it = pool_indices_.find(pool_node);
        if (it == pool_indices_.end())
            throw ConfigError(name + ": referenced node is not a maxpool");
        auto indices = it->second;
        Tensor<T> out = maxunpool2d(value(y), *indices, indices->input_shape, name);
        return push(name, {y, pool_node}, std::move(out), [y, indices](Tape& t) {
            t.accum(y, maxunpool2d_backward(t.grad_of(t.cursor_), *indices));
        });
    }

    const PoolIndices& indices_of(Id pool_node) const {
        return *pool_indices_.at(pool_node);
    }

    Id linear(Id x, Id w, Id b, OpCounter* counter = nullptr,
              const std::string& name = "linear") {
        Tensor<T> y = sadnn::linear(value(x), value(w), value(b), counter);
        return push(name, {x, w, b}, std::move(y), [x, w, b](Tape& t) {
            auto g = linear_backward(t.value(x), t.value(w), t.grad_of(t.cursor_));
            t.accum(x, g.dx);
            t.accum(w, g.dw);
            t.accum(b, g.db);
        });
    }

    // per-pixel channel projection on NCHW: y[n,o,:,:] = sum_ci W[o,ci] x[n,ci,:,:] + b[o]
    Id conv1x1(Id x, Id w, Id b, OpCounter* counter = nullptr,
               const std::string& name = "conv1x1") {
        const Shape4 s = value(x).shape4();
        const std::size_t c_out = value(w).extent(0), c_in = value(w).extent(1);
        if (s.c != c_in || value(b).extent(0) != c_out)
            throw ShapeError(name + ": dimension mismatch");
        Tensor<T> y = detail::project_pixels(value(x), value(w));
        const std::size_t hw = s.h * s.w;
        for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t o = 0; o < c_out; ++o) {
                T* dst = y.data() + (n * c_out + o) * hw;
                for (std::size_t p = 0; p < hw; ++p) dst[p] += value(b)[o];
            }
        if (counter) {
            counter->mul += std::uint64_t(s.n) * c_out * c_in * hw;
            counter->add += std::uint64_t(s.n) * c_out * c_in * hw;
        }
        return push(name, {x, w, b}, std::move(y), [x, w, b](Tape& t) {
            const auto& g = t.grad_of(t.cursor_);
            const Shape4 s2 = t.value(x).shape4();
            const std::size_t co = t.value(w).extent(0), ci = t.value(w).extent(1);
            const std::size_t hw2 = s2.h * s2.w;
            Tensor<T> dx(t.value(x).shape()), dw({co, ci}), db({co});
            for (std::size_t n = 0; n < s2.n; ++n)
                for (std::size_t o = 0; o < co; ++o) {
                    const T* gp = g.data() + (n * co + o) * hw2;
                    for (std::size_t p = 0; p < hw2; ++p) db[o] += gp[p];
                    for (std::size_t c2 = 0; c2 < ci; ++c2) {
                        const T* xp = t.value(x).data() + (n * ci + c2) * hw2;
                        T* dxp = dx.data() + (n * ci + c2) * hw2;
                        const T wv = t.value(w)[o * ci + c2];
                        T acc{0};
                        for (std::size_t p = 0; p < hw2; ++p) {
                            acc += gp[p] * xp[p];
                            dxp[p] += wv * gp[p];
                        }
                        dw[o * ci + c2] += acc;
                    }
                }
            t.accum(x, dx);
            t.accum(w, dw);
            t.accum(b, db);
        });
    }

    Id bce(Id logits, Tensor<T> targets) {
        T loss = bce_loss(value(logits), targets);
        auto tgt = std::make_shared<Tensor<T>>(std::move(targets));
        return push("bce", {logits}, Tensor<T>({1}, {loss}), [logits, tgt](Tape& t) {
            auto dz = bce_loss_backward(t.value(logits), *tgt);
            t.accum(logits, sadnn::scale(dz, t.grad_of(t.cursor_)[0]));
        });
    }

    Id dice(Id pred, Tensor<T> targets) {
        T loss = soft_dice_loss(value(pred), targets);
        auto tgt = std::make_shared<Tensor<T>>(std::move(targets));
        return push("dice", {pred}, Tensor<T>({1}, {loss}), [pred, tgt](Tape& t) {
            auto dp = soft_dice_loss_backward(t.value(pred), *tgt);
            t.accum(pred, sadnn::scale(dp, t.grad_of(t.cursor_)[0]));
        });
    }

    // ---- backward ----

    // Gradients are recomputed from scratch on every call, so repeated calls
    // on the same tape are identical.
    std::vector<Tensor<T>> backward(Id loss) {
        if (value(loss).numel() != 1)
            throw ConfigError("backward: loss must be scalar");
        grads_.assign(nodes_.size(), Tensor<T>());
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            grads_[i] = Tensor<T>(nodes_[i].value.shape());
        grads_[std::size_t(loss)][0] = T{1};
        for (Id i = loss; i >= 0; --i) {
            cursor_ = i;
            if (nodes_[std::size_t(i)].backward_fn) nodes_[std::size_t(i)].backward_fn(*this);
        }
        return std::move(grads_);
    }

private:
    Id push(std::string op, std::vector<Id> inputs, Tensor<T> value,
            std::function<void(Tape&)> bwd) {
        Node n;
        n.op = std::move(op);
        n.inputs = std::move(inputs);
        n.value = std::move(value);
        n.backward_fn = std::move(bwd);
        n.self = Id(nodes_.size());
        nodes_.push_back(std::move(n));
        return Id(nodes_.size() - 1);
    }

    const Tensor<T>& grad_of(Id id) const { return grads_[std::size_t(id)]; }

    void accum(Id id, const Tensor<T>& g) {
        auto& dst = grads_[std::size_t(id)];
        for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    }

    std::vector<Node> nodes_;
    std::vector<Tensor<T>> grads_;
    std::map<Id, std::shared_ptr<PoolIndices>> pool_indices_;
    Id cursor_ = -1;
};

// Compares the tape gradient of a scalar-valued function against central
// finite differences. `build` constructs the loss on a fresh tape from a
// leaf holding x and returns the loss id.
template <class Build>
double grad_check(Build build, const Tensor<double>& x, double step = 1e-5) {
    Tape<double> tape;
    auto xid = tape.leaf(x, "x");
    auto loss = build(tape, xid);
    auto grads = tape.backward(loss);
    const Tensor<double>& analytic = grads[std::size_t(xid)];

    auto eval = [&](const Tensor<double>& xp) {
        Tape<double> t2;
        auto id = t2.leaf(xp, "x");
        return t2.value(build(t2, id))[0];
    };

    double max_err = 0;
    Tensor<double> xp = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        xp[i] = x[i] + step;
        const double fp = eval(xp);
        xp[i] = x[i] - step;
        const double fm = eval(xp);
        xp[i] = x[i];
        const double numeric = (fp - fm) / (2 * step);
        const double a = analytic[i];
        if (!std::isfinite(numeric) || !std::isfinite(a))
            throw NumericError("grad_check: non-finite value at coordinate " +
                               std::to_string(i));
        const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
        max_err = std::max(max_err, std::abs(a - numeric) / denom);
    }
    return max_err;
}

// ---- Adam ----

template <class T>
struct AdamState {
    std::size_t step = 0;
    std::map<std::string, Tensor<T>> m;
    std::map<std::string, Tensor<T>> v;
};

template <class T>
void adam_step(std::map<std::string, Tensor<T>>& params,
               const std::map<std::string, Tensor<T>>& grads, AdamState<T>& state,
               T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8)) {
    state.step += 1;
    const T bc1 = T{1} - std::pow(beta1, T(state.step));
    const T bc2 = T{1} - std::pow(beta2, T(state.step));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor<T>& g = git->second;
        if (!p.same_shape(g)) throw ShapeError("adam_step: grad shape mismatch for " + name);
        auto& m = state.m.try_emplace(name, Tensor<T>(p.shape())).first->second;
        auto& v = state.v.try_emplace(name, Tensor<T>(p.shape())).first->second;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            m[i] = beta1 * m[i] + (T{1} - beta1) * g[i];
            v[i] = beta2 * v[i] + (T{1} - beta2) * g[i] * g[i];
            const T mhat = m[i] / bc1;
            const T vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace sadnn
