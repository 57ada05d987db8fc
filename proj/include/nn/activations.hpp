#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "nn/tensor.hpp"

namespace nn {

enum class ActivationKind { relu, lrelu, alrelu, tanh, pltanh };

// alpha is the slope parameter of the leaky family; relu and tanh ignore it.
struct Activation {
    ActivationKind kind = ActivationKind::relu;
    double alpha = 0.01;
};

inline const char* to_string(ActivationKind k) {
    switch (k) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::lrelu: return "lrelu";
        case ActivationKind::alrelu: return "alrelu";
        case ActivationKind::tanh: return "tanh";
        case ActivationKind::pltanh: return "pltanh";
    }
    return "?";
}

inline ActivationKind parse_activation_kind(const std::string& s) {
    if (s == "relu") return ActivationKind::relu;
    if (s == "lrelu") return ActivationKind::lrelu;
    if (s == "alrelu") return ActivationKind::alrelu;
    if (s == "tanh") return ActivationKind::tanh;
    if (s == "pltanh") return ActivationKind::pltanh;
    throw std::invalid_argument("unknown activation '" + s +
                                "' (expected relu|lrelu|alrelu|tanh|pltanh)");
}

template <class T>
inline T relu_fwd(T x) {
    return x > T(0) ? x : T(0);
}
// Convention: derivative 0 at x = 0.
template <class T>
inline T relu_bwd(T x) {
    return x > T(0) ? T(1) : T(0);
}

template <class T>
inline T lrelu_fwd(T x, T alpha) {
    return x > T(0) ? x : alpha * x;
}
template <class T>
inline T lrelu_bwd(T x, T alpha) {
    return x > T(0) ? T(1) : alpha;
}

// Absolute Leaky ReLU: x for x > 0, alpha*|x| otherwise.
// Convention: derivative at x = 0 ties to the negative branch (-alpha).
template <class T>
inline T alrelu_fwd(T x, T alpha) {
    return x > T(0) ? x : alpha * std::abs(x);
}
template <class T>
inline T alrelu_bwd(T x, T alpha) {
    return x > T(0) ? T(1) : -alpha;
}

template <class T>
inline T tanh_fwd(T x) {
    return std::tanh(x);
}
template <class T>
inline T tanh_bwd(T x) {
    const T t = std::tanh(x);
    return T(1) - t * t;
}

// Parametric Leaky Tanh: max(tanh(x), alpha*|x|). The linear arm dominates
// everywhere on the left and past the positive crossover of tanh(x) = alpha*x
// on the right, leaving the tanh arm active in between.
template <class T>
inline T pltanh_fwd(T x, T alpha) {
    return std::max(std::tanh(x), alpha * std::abs(x));
}

// Derivative of the active arm of the max. Branch equality (x = 0 and the
// positive crossover) routes to the tanh arm, whose sub-derivative at 0 is 1.
template <class T>
inline T pltanh_bwd(T x, T alpha) {
    if (x < T(0)) return -alpha;
    const T t = std::tanh(x);
    if (t >= alpha * x) return T(1) - t * t;
    return alpha;
}

template <class T>
inline T act_fwd(ActivationKind k, T alpha, T x) {
    switch (k) {
        case ActivationKind::relu: return relu_fwd(x);
        case ActivationKind::lrelu: return lrelu_fwd(x, alpha);
        case ActivationKind::alrelu: return alrelu_fwd(x, alpha);
        case ActivationKind::tanh: return tanh_fwd(x);
        case ActivationKind::pltanh: return pltanh_fwd(x, alpha);
    }
    return T(0);
}

template <class T>
inline T act_bwd(ActivationKind k, T alpha, T x) {
    switch (k) {
        case ActivationKind::relu: return relu_bwd(x);
        case ActivationKind::lrelu: return lrelu_bwd(x, alpha);
        case ActivationKind::alrelu: return alrelu_bwd(x, alpha);
        case ActivationKind::tanh: return tanh_bwd(x);
        case ActivationKind::pltanh: return pltanh_bwd(x, alpha);
    }
    return T(0);
}

inline void check_alpha(const Activation& a) {
    if (a.alpha < 0.0)
        throw std::invalid_argument("activation alpha must be non-negative, got " +
                                    std::to_string(a.alpha));
}

// The unique positive solution of tanh(x) = alpha*x for 0 < alpha < 1; the
// point where pltanh switches from the tanh arm to the linear arm.
struct CrossoverPoint {
    double x_star = 0.0;
    double residual = 0.0;  // |tanh(x_star) - alpha*x_star|
};

inline CrossoverPoint solve_crossover(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("solve_crossover: no positive crossover for alpha = " +
                                std::to_string(alpha) + " (requires 0 < alpha < 1)");
    auto g = [alpha](double x) { return std::tanh(x) - alpha * x; };
    double lo = 1e-12, hi = 2.0 / alpha;
    // g(lo) > 0 since tanh'(0) = 1 > alpha; g(hi) < 0 since tanh < 1 <= alpha*hi/2*2.
    double best = hi, best_res = std::abs(g(hi));
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (std::abs(gm) < best_res) {
            best = mid;
            best_res = std::abs(gm);
        }
        if (best_res <= 1e-13 || hi - lo <= 1e-15 * std::max(1.0, mid)) break;
        if (gm > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return CrossoverPoint{best, best_res};
}

// Elementwise application over a tensor.
template <class T>
Tensor<T> apply_activation(const Activation& a, const Tensor<T>& x) {
    check_alpha(a);
    Tensor<T> y = Tensor<T>::uninitialized(x.shape());
    const T alpha = static_cast<T>(a.alpha);
    for (int64_t i = 0; i < x.size(); ++i) y[i] = act_fwd(a.kind, alpha, x[i]);
    return y;
}

// dx = act'(x) * dy, elementwise at the saved pre-activation values.
template <class T>
Tensor<T> apply_activation_backward(const Activation& a, const Tensor<T>& x, const Tensor<T>& dy) {
    Tensor<T> dx = Tensor<T>::uninitialized(x.shape());
    const T alpha = static_cast<T>(a.alpha);
    for (int64_t i = 0; i < x.size(); ++i) dx[i] = act_bwd(a.kind, alpha, x[i]) * dy[i];
    return dx;
}

}  // namespace nn
