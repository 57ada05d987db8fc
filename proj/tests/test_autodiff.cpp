#include <cmath>
#include <random>

#include "doctest.h"
#include "nn/autodiff.hpp"
#include "oracles.hpp"

using namespace nn;
using doctest::Approx;

namespace {

// FD check of a scalar-valued tape program with respect to one leaf tensor.
template <class Program>
double max_fd_err(Program&& prog, const Tensor64& x0, double h = 1e-6) {
    Tape<double> tape;
    NodeId x = tape.leaf(x0, true);
    NodeId loss = prog(tape, x);
    tape.backward(loss);
    const Tensor64 analytic = tape.grad(x);

    Tensor64 fd = finite_difference_gradient(
        [&](const Tensor64& xv) {
            Tape<double> t2;
            NodeId x2 = t2.leaf(xv, true);
            return t2.value(prog(t2, x2))[0];
        },
        x0, h);

    double worst = 0;
    for (int64_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, grad_rel_err(analytic[i], fd[i]));
    return worst;
}

}  // namespace

TEST_CASE("dense backward equals the hand-computed 2x2 case") {
    // x = [[1,2],[3,4]], w = [[5,6],[7,8]], upstream all ones.
    // dW = x^T * dy = [[4,4],[6,6]]; dx = dy * w^T = [[11,15],[11,15]]; db = [2,2].
    Tape<double> tape;
    NodeId x = tape.leaf(Tensor64({2, 2}, {1, 2, 3, 4}), true);
    NodeId w = tape.leaf(Tensor64({2, 2}, {5, 6, 7, 8}), true);
    NodeId b = tape.leaf(Tensor64({2}, {0, 0}), true);
    NodeId y = tape.dense(x, w, b);
    NodeId loss = tape.sum(y);
    tape.backward(loss);

    const Tensor64& dw = tape.grad(w);
    CHECK(dw.at(0, 0) == 4.0);
    CHECK(dw.at(0, 1) == 4.0);
    CHECK(dw.at(1, 0) == 6.0);
    CHECK(dw.at(1, 1) == 6.0);
    const Tensor64& dx = tape.grad(x);
    CHECK(dx.at(0, 0) == 11.0);
    CHECK(dx.at(0, 1) == 15.0);
    const Tensor64& db = tape.grad(b);
    CHECK(db[0] == 2.0);
    CHECK(db[1] == 2.0);
}

TEST_CASE("fan-out gradients accumulate by summation") {
    Tape<double> tape;
    NodeId x = tape.leaf(Tensor64({3}, {1, 2, 3}), true);
    NodeId y = tape.add(x, x);  // y = 2x
    NodeId loss = tape.sum(y);
    tape.backward(loss);
    const Tensor64& g = tape.grad(x);
    for (int64_t i = 0; i < 3; ++i) CHECK(g[i] == 2.0);
}

TEST_CASE("mul backward gives each operand the other's value") {
    Tape<double> tape;
    NodeId a = tape.leaf(Tensor64({2}, {3, 4}), true);
    NodeId b = tape.leaf(Tensor64({2}, {5, 6}), true);
    tape.backward(tape.sum(tape.mul(a, b)));
    CHECK(tape.grad(a)[0] == 5.0);
    CHECK(tape.grad(a)[1] == 6.0);
    CHECK(tape.grad(b)[0] == 3.0);
    CHECK(tape.grad(b)[1] == 4.0);
}

TEST_CASE("conv2d op gradient matches finite differences") {
    std::mt19937_64 rng(11);
    const Tensor64 x0 = oracle::random_tensor({2, 5, 5, 2}, rng);
    const Tensor64 k0 = oracle::random_tensor({3, 3, 2, 3}, rng);
    const Tensor64 b0 = oracle::random_tensor({3}, rng);

    for (Padding pad : {Padding::valid, Padding::same}) {
        // wrt input
        double err = max_fd_err([&](Tape<double>& t, NodeId x) {
            NodeId k = t.leaf(k0), b = t.leaf(b0);
            return t.sum(t.conv2d(x, k, b, pad));
        }, x0);
        CHECK(err < 1e-8);
        // wrt kernel
        err = max_fd_err([&](Tape<double>& t, NodeId k) {
            NodeId x = t.leaf(x0), b = t.leaf(b0);
            return t.sum(t.conv2d(x, k, b, pad));
        }, k0);
        CHECK(err < 1e-8);
        // wrt bias
        err = max_fd_err([&](Tape<double>& t, NodeId b) {
            NodeId x = t.leaf(x0), k = t.leaf(k0);
            return t.sum(t.conv2d(x, k, b, pad));
        }, b0);
        CHECK(err < 1e-8);
    }
}

TEST_CASE("maxpool routes gradient to the argmax only") {
    Tensor64 x({1, 2, 2, 1}, {1.0, 5.0, 2.0, 3.0});
    Tape<double> tape;
    NodeId xn = tape.leaf(x, true);
    tape.backward(tape.sum(tape.maxpool2d(xn)));
    const Tensor64& g = tape.grad(xn);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 1.0);
    CHECK(g[2] == 0.0);
    CHECK(g[3] == 0.0);
}

TEST_CASE("maxpool gradient matches finite differences on random input") {
    std::mt19937_64 rng(13);
    const Tensor64 x0 = oracle::random_tensor({2, 6, 6, 3}, rng);
    const double err = max_fd_err(
        [&](Tape<double>& t, NodeId x) { return t.sum(t.maxpool2d(x)); }, x0);
    CHECK(err < 1e-8);
}

TEST_CASE("batchnorm train backward matches finite differences") {
    std::mt19937_64 rng(17);
    const Tensor64 x0 = oracle::random_tensor({4, 3, 3, 2}, rng);
    const Tensor64 g0 = oracle::random_tensor({2}, rng, 0.5, 1.5);
    const Tensor64 b0 = oracle::random_tensor({2}, rng);
    const double eps = 1e-3;

    // Weight each output element differently so dmean/dvar terms matter.
    auto weighted_sum = [](Tape<double>& t, NodeId y) {
        const Tensor64& v = t.value(y);
        Tensor64 w(v.shape());
        for (int64_t i = 0; i < w.size(); ++i) w[i] = 0.1 * double(i % 7) - 0.3;
        return t.sum(t.mul(y, t.leaf(w)));
    };

    double err = max_fd_err([&](Tape<double>& t, NodeId x) {
        auto [y, st] = t.batchnorm_train(x, t.leaf(g0), t.leaf(b0), eps);
        return weighted_sum(t, y);
    }, x0);
    CHECK(err < 1e-7);

    err = max_fd_err([&](Tape<double>& t, NodeId g) {
        auto [y, st] = t.batchnorm_train(t.leaf(x0), g, t.leaf(b0), eps);
        return weighted_sum(t, y);
    }, g0);
    CHECK(err < 1e-7);

    err = max_fd_err([&](Tape<double>& t, NodeId b) {
        auto [y, st] = t.batchnorm_train(t.leaf(x0), t.leaf(g0), b, eps);
        return weighted_sum(t, y);
    }, b0);
    CHECK(err < 1e-7);
}

TEST_CASE("batchnorm infer backward matches finite differences") {
    std::mt19937_64 rng(19);
    const Tensor64 x0 = oracle::random_tensor({3, 4}, rng);
    const Tensor64 g0 = oracle::random_tensor({4}, rng, 0.5, 1.5);
    const Tensor64 b0 = oracle::random_tensor({4}, rng);
    const Tensor64 rm = oracle::random_tensor({4}, rng);
    const Tensor64 rv = oracle::random_tensor({4}, rng, 0.5, 2.0);

    const double err = max_fd_err([&](Tape<double>& t, NodeId x) {
        return t.sum(t.batchnorm_infer(x, t.leaf(g0), t.leaf(b0), rm, rv, 1e-3));
    }, x0);
    CHECK(err < 1e-8);
}

TEST_CASE("global_avg_pool and flatten backward match finite differences") {
    std::mt19937_64 rng(23);
    const Tensor64 x0 = oracle::random_tensor({2, 3, 3, 4}, rng);
    double err = max_fd_err(
        [&](Tape<double>& t, NodeId x) { return t.sum(t.global_avg_pool(x)); }, x0);
    CHECK(err < 1e-9);
    err = max_fd_err([&](Tape<double>& t, NodeId x) { return t.sum(t.flatten(x)); }, x0);
    CHECK(err < 1e-9);
}

TEST_CASE("dropout backward applies the saved mask") {
    std::mt19937_64 rng(29);
    const Tensor64 x0 = oracle::random_tensor({4, 8}, rng);
    Tape<double> tape;
    NodeId x = tape.leaf(x0, true);
    std::mt19937_64 drng(5);
    NodeId y = tape.dropout(x, 0.5, drng);
    tape.backward(tape.sum(y));
    const Tensor64& g = tape.grad(x);
    const Tensor64& yv = tape.value(y);
    for (int64_t i = 0; i < x0.size(); ++i) {
        if (yv[i] == 0.0 && x0[i] != 0.0) CHECK(g[i] == 0.0);
        else CHECK(g[i] == 2.0);  // 1/(1-0.5)
    }
}

TEST_CASE("activation op gradients match finite differences") {
    std::mt19937_64 rng(31);
    Tensor64 x0 = oracle::random_tensor({3, 7}, rng, -2.0, 2.0);
    // Keep points away from the kink at zero so FD is clean.
    for (int64_t i = 0; i < x0.size(); ++i)
        if (std::abs(x0[i]) < 1e-2) x0[i] += 0.05;

    for (ActivationKind k : {ActivationKind::relu, ActivationKind::lrelu, ActivationKind::alrelu,
                             ActivationKind::tanh, ActivationKind::pltanh}) {
        const Activation a{k, 0.01};
        const double err = max_fd_err(
            [&](Tape<double>& t, NodeId x) { return t.sum(t.activation(x, a)); }, x0);
        INFO("activation ", to_string(k));
        CHECK(err < 1e-8);
    }
}

TEST_CASE("softmax rows sum to one and gradient checks out") {
    std::mt19937_64 rng(37);
    const Tensor64 x0 = oracle::random_tensor({3, 5}, rng, -3.0, 3.0);
    Tape<double> tape;
    NodeId x = tape.leaf(x0, true);
    NodeId p = tape.softmax(x);
    const Tensor64& pv = tape.value(p);
    for (int i = 0; i < 3; ++i) {
        double s = 0;
        for (int j = 0; j < 5; ++j) s += pv.at(i, j);
        CHECK(s == Approx(1.0).epsilon(1e-12));
    }

    const double err = max_fd_err([&](Tape<double>& t, NodeId xx) {
        // Weighted sum to exercise off-diagonal Jacobian terms.
        NodeId pp = t.softmax(xx);
        Tensor64 w({3, 5});
        for (int64_t i = 0; i < w.size(); ++i) w[i] = 0.2 * double(i % 5) - 0.4;
        return t.sum(t.mul(pp, t.leaf(w)));
    }, x0);
    CHECK(err < 1e-8);
}

TEST_CASE("softmax plus cross-entropy gives (p - y)/N on the logits") {
    std::mt19937_64 rng(41);
    const int n = 4, k = 6;
    const Tensor64 x0 = oracle::random_tensor({n, k}, rng, -2.0, 2.0);
    Tensor64 y({n, k});
    for (int i = 0; i < n; ++i) y.at(i, i % k) = 1.0;

    Tape<double> tape;
    NodeId x = tape.leaf(x0, true);
    NodeId p = tape.softmax(x);
    NodeId loss = tape.cross_entropy(p, tape.leaf(y));
    tape.backward(loss);

    const Tensor64& pv = tape.value(p);
    const Tensor64& g = tape.grad(x);
    for (int64_t i = 0; i < g.size(); ++i)
        CHECK(g[i] == Approx((pv[i] - y[i]) / n).epsilon(1e-10));

    // And the same thing against finite differences of the composite.
    const double err = max_fd_err([&](Tape<double>& t, NodeId xx) {
        return t.cross_entropy(t.softmax(xx), t.leaf(y));
    }, x0);
    CHECK(err < 1e-8);
}

TEST_CASE("cross-entropy pinned values") {
    // Uniform prediction over 10 classes: ln 10.
    Tensor64 p = Tensor64::full({1, 10}, 0.1);
    Tensor64 y({1, 10});
    y.at(0, 3) = 1.0;
    Tape<double> tape;
    NodeId loss = tape.cross_entropy(tape.leaf(p), tape.leaf(y));
    CHECK(tape.value(loss)[0] == Approx(2.302585092994046).epsilon(1e-12));

    // Perfect prediction: zero loss.
    Tensor64 perfect({1, 3}, {0.0, 1.0, 0.0});
    Tensor64 y2({1, 3}, {0.0, 1.0, 0.0});
    Tape<double> t2;
    CHECK(t2.value(t2.cross_entropy(t2.leaf(perfect), t2.leaf(y2)))[0] == 0.0);

    // Zero probability on the true class is clamped, not infinite.
    Tensor64 zero({1, 2}, {1.0, 0.0});
    Tensor64 y3({1, 2}, {0.0, 1.0});
    Tape<double> t3;
    const double clamped = t3.value(t3.cross_entropy(t3.leaf(zero), t3.leaf(y3)))[0];
    CHECK(std::isfinite(clamped));
    CHECK(clamped == Approx(-std::log(1e-12)).epsilon(1e-12));
}

TEST_CASE("backward demands a scalar loss") {
    Tape<double> tape;
    NodeId x = tape.leaf(Tensor64({2}, {1, 2}), true);
    NodeId y = tape.add(x, x);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("foreign node ids are rejected") {
    Tape<double> a, b;
    NodeId xa = a.leaf(Tensor64({1}, {1.0}), true);
    CHECK_THROWS_AS(b.value(xa), std::invalid_argument);
    CHECK_THROWS_AS(b.backward(xa), std::invalid_argument);
}

TEST_CASE("untouched nodes report zero gradient") {
    Tape<double> tape;
    NodeId x = tape.leaf(Tensor64({2}, {1, 2}), true);
    NodeId unused = tape.leaf(Tensor64({3}, {1, 2, 3}), true);
    tape.backward(tape.sum(x));
    const Tensor64& g = tape.grad(unused);
    CHECK(g.size() == 3);
    for (int64_t i = 0; i < 3; ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("shape mismatches in ops throw ShapeError") {
    Tape<double> tape;
    NodeId a = tape.leaf(Tensor64({2}, {1, 2}));
    NodeId b = tape.leaf(Tensor64({3}, {1, 2, 3}));
    CHECK_THROWS_AS(tape.add(a, b), ShapeError);
    CHECK_THROWS_AS(tape.mul(a, b), ShapeError);
}
