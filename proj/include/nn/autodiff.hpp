#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "nn/activations.hpp"
#include "nn/kernels.hpp"
#include "nn/tensor.hpp"

namespace nn {

// Handle into one tape's value store. Only valid on the tape that issued it.
struct NodeId {
    uint32_t tape = 0;
    int32_t idx = -1;
    bool valid() const { return idx >= 0; }
};

inline uint32_t next_tape_tag() {
    static std::atomic<uint32_t> counter{0};
    return ++counter;
}

// Reverse-mode tape. Operations compute their forward value immediately and
// push a backward closure; backward() replays the closures once, in reverse
// recording order, accumulating gradients by summation at fan-out.
template <class T>
class Tape {
public:
    Tape() : tag_(next_tape_tag()) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    NodeId leaf(Tensor<T> v, bool needs_grad = false) {
        return push(std::move(v), needs_grad, {});
    }

    const Tensor<T>& value(NodeId n) const { return vals_[check(n)]; }

    // Zero tensor of the node's shape when the node did not influence the loss.
    const Tensor<T>& grad(NodeId n) {
        const size_t i = check(n);
        if (grads_[i].empty()) grads_[i] = Tensor<T>(vals_[i].shape());
        return grads_[i];
    }

    NodeId add(NodeId a, NodeId b) {
        const Tensor<T>&va = value(a), &vb = value(b);
        if (!va.same_shape(vb))
            throw ShapeError("add: shape mismatch " + shape_str(va.shape()) + " vs " +
                             shape_str(vb.shape()));
        Tensor<T> y = Tensor<T>::uninitialized(va.shape());
        for (int64_t i = 0; i < y.size(); ++i) y[i] = va[i] + vb[i];
        NodeId out = push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, NodeId o) {
            const Tensor<T>& g = t.grad_of(o);
            t.accumulate(a, g);
            t.accumulate(b, g);
        });
        return out;
    }

    NodeId mul(NodeId a, NodeId b) {
        const Tensor<T>&va = value(a), &vb = value(b);
        if (!va.same_shape(vb))
            throw ShapeError("mul: shape mismatch " + shape_str(va.shape()) + " vs " +
                             shape_str(vb.shape()));
        Tensor<T> y = Tensor<T>::uninitialized(va.shape());
        for (int64_t i = 0; i < y.size(); ++i) y[i] = va[i] * vb[i];
        return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, NodeId o) {
            const Tensor<T>& g = t.grad_of(o);
            const Tensor<T>&xa = t.value(a), &xb = t.value(b);
            Tensor<T> ga = Tensor<T>::uninitialized(xa.shape());
            Tensor<T> gb = Tensor<T>::uninitialized(xb.shape());
            for (int64_t i = 0; i < g.size(); ++i) {
                ga[i] = g[i] * xb[i];
                gb[i] = g[i] * xa[i];
            }
            t.accumulate(a, std::move(ga));
            t.accumulate(b, std::move(gb));
        });
    }

    NodeId sum(NodeId a) {
        const Tensor<T>& va = value(a);
        T s = T(0);
        for (int64_t i = 0; i < va.size(); ++i) s += va[i];
        return push(Tensor<T>({1}, {s}), needs(a), [a](Tape& t, NodeId o) {
            const T g = t.grad_of(o)[0];
            Tensor<T> ga = Tensor<T>::full(t.value(a).shape(), g);
            t.accumulate(a, std::move(ga));
        });
    }

    NodeId conv2d(NodeId x, NodeId k, NodeId b, Padding pad) {
        Tensor<T> y = nn::conv2d(value(x), value(k), value(b), pad);
        return push(std::move(y), needs(x) || needs(k) || needs(b),
                    [x, k, b, pad](Tape& t, NodeId o) {
                        const Tensor<T>& g = t.grad_of(o);
                        Tensor<T> dx, dk, db;
                        conv2d_backward(t.value(x), t.value(k), pad, g,
                                        t.needs(x) ? &dx : nullptr, t.needs(k) ? &dk : nullptr,
                                        t.needs(b) ? &db : nullptr);
                        if (t.needs(x)) t.accumulate(x, std::move(dx));
                        if (t.needs(k)) t.accumulate(k, std::move(dk));
                        if (t.needs(b)) t.accumulate(b, std::move(db));
                    });
    }

    NodeId dense(NodeId x, NodeId w, NodeId b) {
        Tensor<T> y = nn::dense(value(x), value(w), value(b));
        return push(std::move(y), needs(x) || needs(w) || needs(b),
                    [x, w, b](Tape& t, NodeId o) {
                        const Tensor<T>& g = t.grad_of(o);
                        Tensor<T> dx, dw, db;
                        dense_backward(t.value(x), t.value(w), g, t.needs(x) ? &dx : nullptr,
                                       t.needs(w) ? &dw : nullptr, t.needs(b) ? &db : nullptr);
                        if (t.needs(x)) t.accumulate(x, std::move(dx));
                        if (t.needs(w)) t.accumulate(w, std::move(dw));
                        if (t.needs(b)) t.accumulate(b, std::move(db));
                    });
    }

    NodeId maxpool2d(NodeId x) {
        MaxPoolOut<T> r = nn::maxpool2d(value(x));
        auto argmax = std::make_shared<std::vector<int64_t>>(std::move(r.argmax));
        std::vector<int> in_shape = value(x).shape();
        return push(std::move(r.y), needs(x), [x, argmax, in_shape](Tape& t, NodeId o) {
            if (!t.needs(x)) return;
            Tensor<T> dx = maxpool2d_backward(in_shape, *argmax, t.grad_of(o));
            t.accumulate(x, std::move(dx));
        });
    }

    // Returns the node plus the batch statistics so the training loop can
    // fold them into the running estimates.
    std::pair<NodeId, BnStats<T>> batchnorm_train(NodeId x, NodeId gamma, NodeId beta, T eps) {
        BnTrainOut<T> r = nn::batchnorm_train(value(x), value(gamma), value(beta), eps);
        auto stats = std::make_shared<BnStats<T>>(r.stats);
        NodeId out = push(std::move(r.y), needs(x) || needs(gamma) || needs(beta),
                          [x, gamma, beta, stats, eps](Tape& t, NodeId o) {
                              const Tensor<T>& g = t.grad_of(o);
                              Tensor<T> dx, dgamma, dbeta;
                              batchnorm_train_backward(t.value(x), t.value(gamma), *stats, eps, g,
                                                       t.needs(x) ? &dx : nullptr,
                                                       t.needs(gamma) ? &dgamma : nullptr,
                                                       t.needs(beta) ? &dbeta : nullptr);
                              if (t.needs(x)) t.accumulate(x, std::move(dx));
                              if (t.needs(gamma)) t.accumulate(gamma, std::move(dgamma));
                              if (t.needs(beta)) t.accumulate(beta, std::move(dbeta));
                          });
        return {out, *stats};
    }

    NodeId batchnorm_infer(NodeId x, NodeId gamma, NodeId beta, Tensor<T> rmean, Tensor<T> rvar,
                           T eps) {
        Tensor<T> y = nn::batchnorm_infer(value(x), value(gamma), value(beta), rmean, rvar, eps);
        auto rm = std::make_shared<Tensor<T>>(std::move(rmean));
        auto rv = std::make_shared<Tensor<T>>(std::move(rvar));
        return push(std::move(y), needs(x) || needs(gamma) || needs(beta),
                    [x, gamma, beta, rm, rv, eps](Tape& t, NodeId o) {
                        const Tensor<T>& g = t.grad_of(o);
                        Tensor<T> dx, dgamma, dbeta;
                        batchnorm_infer_backward(t.value(x), t.value(gamma), *rm, *rv, eps, g,
                                                 t.needs(x) ? &dx : nullptr,
                                                 t.needs(gamma) ? &dgamma : nullptr,
                                                 t.needs(beta) ? &dbeta : nullptr);
                        if (t.needs(x)) t.accumulate(x, std::move(dx));
                        if (t.needs(gamma)) t.accumulate(gamma, std::move(dgamma));
                        if (t.needs(beta)) t.accumulate(beta, std::move(dbeta));
                    });
    }

    NodeId dropout(NodeId x, double rate, std::mt19937_64& rng) {
        DropoutOut<T> r = dropout_train(value(x), rate, rng);
        auto mask = std::make_shared<Tensor<T>>(std::move(r.mask));
        return push(std::move(r.y), needs(x), [x, mask](Tape& t, NodeId o) {
            if (!t.needs(x)) return;
            Tensor<T> dx = dropout_backward(*mask, t.grad_of(o));
            t.accumulate(x, std::move(dx));
        });
    }

    NodeId global_avg_pool(NodeId x) {
        Tensor<T> y = nn::global_avg_pool(value(x));
        std::vector<int> in_shape = value(x).shape();
        return push(std::move(y), needs(x), [x, in_shape](Tape& t, NodeId o) {
            if (!t.needs(x)) return;
            Tensor<T> dx = global_avg_pool_backward(in_shape, t.grad_of(o));
            t.accumulate(x, std::move(dx));
        });
    }

    NodeId flatten(NodeId x) {
        Tensor<T> y = nn::flatten(value(x));
        std::vector<int> in_shape = value(x).shape();
        return push(std::move(y), needs(x), [x, in_shape](Tape& t, NodeId o) {
            if (!t.needs(x)) return;
            Tensor<T> dx = t.grad_of(o).reshaped(in_shape);
            t.accumulate(x, std::move(dx));
        });
    }

    // tanh and pltanh reuse the tanh values computed during the forward pass
    // (the forward output itself for tanh, a saved side tensor for pltanh), so
    // the backward pass costs no transcendental calls. The values match an
    // apply_activation_backward recomputation bit for bit: same inputs, same
    // libm call.
    NodeId activation(NodeId x, Activation a) {
        check_alpha(a);
        if (a.kind == ActivationKind::pltanh) return pltanh_node(x, static_cast<T>(a.alpha));
        Tensor<T> y = apply_activation(a, value(x));
        if (a.kind == ActivationKind::tanh)
            return push(std::move(y), needs(x), [x](Tape& t, NodeId o) {
                if (!t.needs(x)) return;
                const Tensor<T>&th = t.value(o), &g = t.grad_of(o);
                Tensor<T> dx = Tensor<T>::uninitialized(th.shape());
                for (int64_t i = 0; i < dx.size(); ++i)
                    dx[i] = (T(1) - th[i] * th[i]) * g[i];
                t.accumulate(x, std::move(dx));
            });
        return push(std::move(y), needs(x), [x, a](Tape& t, NodeId o) {
            if (!t.needs(x)) return;
            Tensor<T> dx = apply_activation_backward(a, t.value(x), t.grad_of(o));
            t.accumulate(x, std::move(dx));
        });
    }

    NodeId softmax(NodeId x) {
        Tensor<T> y = nn::softmax(value(x));
        return push(std::move(y), needs(x), [x](Tape& t, NodeId o) {
            if (!t.needs(x)) return;
            Tensor<T> dx = softmax_backward(t.value(o), t.grad_of(o));
            t.accumulate(x, std::move(dx));
        });
    }

    // Mean over the batch of -log(p_true), p clamped to >= 1e-12 before the
    // log. Scalar output.
    NodeId cross_entropy(NodeId probs, NodeId one_hot) {
        const Tensor<T>&p = value(probs), &y = value(one_hot);
        if (!p.same_shape(y) || p.ndim() != 2)
            throw ShapeError("cross_entropy: expected matching (N,K) tensors, got " +
                             shape_str(p.shape()) + " and " + shape_str(y.shape()));
        const int n = p.dim(0), k = p.dim(1);
        const T clamp = T(1e-12);
        T loss = T(0);
        for (int64_t i = 0; i < p.size(); ++i)
            if (y[i] != T(0)) loss -= y[i] * std::log(std::max(p[i], clamp));
        loss /= static_cast<T>(n);
        return push(Tensor<T>({1}, {loss}), needs(probs) || needs(one_hot),
                    [probs, one_hot, n, k, clamp](Tape& t, NodeId o) {
                        if (!t.needs(probs)) return;
                        const T g = t.grad_of(o)[0];
                        const Tensor<T>&p = t.value(probs), &y = t.value(one_hot);
                        Tensor<T> dp(p.shape());
                        for (int64_t i = 0; i < p.size(); ++i)
                            if (y[i] != T(0))
                                dp[i] = -g * y[i] / (std::max(p[i], clamp) * static_cast<T>(n));
                        (void)k;
                        t.accumulate(probs, std::move(dp));
                    });
    }

    // Seeds d(loss)/d(loss) = 1 and replays the tape once in reverse.
    void backward(NodeId loss) {
        const size_t li = check(loss);
        if (vals_[li].size() != 1)
            throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                        shape_str(vals_[li].shape()));
        grads_.assign(vals_.size(), Tensor<T>());
        grads_[li] = Tensor<T>({1}, {T(1)});
        for (size_t i = entries_.size(); i-- > 0;) {
            Entry& e = entries_[i];
            if (!e.backward) continue;
            if (grads_[static_cast<size_t>(e.out.idx)].empty()) continue;  // no influence
            e.backward(*this, e.out);
        }
    }

    bool needs(NodeId n) const { return needs_[check(n)]; }
    size_t num_nodes() const { return vals_.size(); }

private:
    struct Entry {
        NodeId out;
        std::function<void(Tape&, NodeId)> backward;
    };

    size_t check(NodeId n) const {
        if (n.tape != tag_ || n.idx < 0 || static_cast<size_t>(n.idx) >= vals_.size())
            throw std::invalid_argument("NodeId does not belong to this tape");
        return static_cast<size_t>(n.idx);
    }

    const Tensor<T>& grad_of(NodeId n) { return grad(n); }

    void accumulate(NodeId n, const Tensor<T>& g) {
        const size_t i = check(n);
        Tensor<T>& buf = grads_[i];
        if (buf.empty()) {
            buf = g;
            return;
        }
        for (int64_t j = 0; j < g.size(); ++j) buf[j] += g[j];
    }

    // First contribution takes ownership of the closure's scratch tensor
    // instead of copying it; fan-in greater than one still sums.
    void accumulate(NodeId n, Tensor<T>&& g) {
        const size_t i = check(n);
        Tensor<T>& buf = grads_[i];
        if (buf.empty()) {
            buf = std::move(g);
            return;
        }
        for (int64_t j = 0; j < g.size(); ++j) buf[j] += g[j];
    }

    NodeId pltanh_node(NodeId x, T alpha) {
        const Tensor<T>& vx = value(x);
        Tensor<T> y = Tensor<T>::uninitialized(vx.shape());
        auto aux = std::make_shared<Tensor<T>>(Tensor<T>::uninitialized(vx.shape()));
        Tensor<T>& th = *aux;
        for (int64_t i = 0; i < vx.size(); ++i) {
            const T t = std::tanh(vx[i]);
            th[i] = t;
            y[i] = std::max(t, alpha * std::abs(vx[i]));
        }
        return push(std::move(y), needs(x), [x, alpha, aux](Tape& tp, NodeId o) {
            if (!tp.needs(x)) return;
            const Tensor<T>&vx2 = tp.value(x), &g = tp.grad_of(o), &th2 = *aux;
            Tensor<T> dx = Tensor<T>::uninitialized(vx2.shape());
            for (int64_t i = 0; i < dx.size(); ++i) {
                const T xi = vx2[i];
                T d;
                if (xi < T(0)) {
                    d = -alpha;
                } else {
                    const T t = th2[i];
                    d = t >= alpha * xi ? T(1) - t * t : alpha;
                }
                dx[i] = d * g[i];
            }
            tp.accumulate(x, std::move(dx));
        });
    }

    NodeId push(Tensor<T> v, bool needs_grad, std::function<void(Tape&, NodeId)> bwd) {
        NodeId id{tag_, static_cast<int32_t>(vals_.size())};
        vals_.push_back(std::move(v));
        grads_.emplace_back();
        needs_.push_back(needs_grad);
        entries_.push_back(Entry{id, std::move(bwd)});
        return id;
    }

    uint32_t tag_;
    std::vector<Tensor<T>> vals_;
    std::vector<Tensor<T>> grads_;
    std::vector<bool> needs_;
    std::vector<Entry> entries_;
};

// Central finite differences, (f(x+h*e_i) - f(x-h*e_i)) / 2h per coordinate.
template <class F>
Tensor64 finite_difference_gradient(F&& f, const Tensor64& x, double h) {
    Tensor64 g(x.shape());
    Tensor64 xp = x;
    for (int64_t i = 0; i < x.size(); ++i) {
        const double orig = xp[i];
        xp[i] = orig + h;
        const double fp = f(xp);
        xp[i] = orig - h;
        const double fm = f(xp);
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Relative error with a unit floor, so saturated near-zero gradients compare
// by absolute error instead of blowing up the denominator.
inline double grad_rel_err(double a, double f) {
    return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1.0});
}

}  // namespace nn
