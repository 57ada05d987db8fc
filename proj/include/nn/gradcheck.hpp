#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nn/model.hpp"

namespace nn {

struct GradCheckItem {
    std::string name;
    double max_rel_err = 0;
    bool pass = false;
};

// A scalar function with its claimed derivative and the points (kinks) to
// exclude from finite-difference sampling. Injectable so a deliberately
// corrupted derivative can be fed through the same harness.
struct ScalarAct {
    std::string name;
    std::function<double(double)> fwd;
    std::function<double(double)> bwd;
    std::vector<double> exclude;
};

struct GradCheckOptions {
    int points = 1000;
    double lo = -50.0, hi = 150.0;
    double h = 1e-6;
    double tol = 1e-6;
    double exclude_radius = 1e-3;
    uint64_t seed = 20240817;
};

GradCheckItem gradcheck_scalar(const ScalarAct& act, const GradCheckOptions& opt = {});

// Every activation kind crossed with alpha in {1e-9, 0.01, 0.4}.
std::vector<ScalarAct> standard_activation_suite();
std::vector<GradCheckItem> gradcheck_activations(const GradCheckOptions& opt = {});

struct ArchCheckOptions {
    int batch = 4;
    int coords_per_tensor = 25;  // sampled parameter coordinates per tensor
    // Step sized for 64-bit central differences on deep nets: large enough to
    // clear the loss's rounding noise, small enough that batch-norm curvature
    // and activation/pool kinks stay out of the stencil.
    double h = 1e-6;
    double tol = 1e-4;
    uint64_t seed = 31;
};

// Whole-network check: analytic gradients from one taped train-mode forward
// against central finite differences of the loss, both with identical
// dropout streams. 64-bit throughout.
GradCheckItem gradcheck_architecture(const ModelSpec& spec, const ArchCheckOptions& opt = {});

// The four architectures at toy input sizes.
std::vector<GradCheckItem> gradcheck_architectures(Activation act, const ArchCheckOptions& opt = {});

}  // namespace nn
