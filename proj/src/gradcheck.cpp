#include "nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nn/train.hpp"

namespace nn {

GradCheckItem gradcheck_scalar(const ScalarAct& act, const GradCheckOptions& opt) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> dist(opt.lo, opt.hi);
    GradCheckItem item{act.name, 0.0, false};
    int used = 0;
    while (used < opt.points) {
        const double x = dist(rng);
        bool excluded = false;
        for (double e : act.exclude)
            if (std::abs(x - e) < opt.exclude_radius) {
                excluded = true;
                break;
            }
        if (excluded) continue;
        ++used;
        const double fd = (act.fwd(x + opt.h) - act.fwd(x - opt.h)) / (2.0 * opt.h);
        item.max_rel_err = std::max(item.max_rel_err, grad_rel_err(act.bwd(x), fd));
    }
    item.pass = item.max_rel_err <= opt.tol;
    return item;
}

std::vector<ScalarAct> standard_activation_suite() {
    const ActivationKind kinds[] = {ActivationKind::relu, ActivationKind::lrelu,
                                    ActivationKind::alrelu, ActivationKind::tanh,
                                    ActivationKind::pltanh};
    const double alphas[] = {1e-9, 0.01, 0.4};
    std::vector<ScalarAct> suite;
    for (ActivationKind k : kinds) {
        for (double a : alphas) {
            ScalarAct s;
            s.name = std::string(to_string(k)) + "(alpha=" + std::to_string(a) + ")";
            s.fwd = [k, a](double x) { return act_fwd(k, a, x); };
            s.bwd = [k, a](double x) { return act_bwd(k, a, x); };
            s.exclude = {0.0};
            if (k == ActivationKind::pltanh) {
                const CrossoverPoint cp = solve_crossover(a);
                s.exclude.push_back(cp.x_star);
                s.exclude.push_back(-cp.x_star);
            }
            suite.push_back(std::move(s));
        }
    }
    return suite;
}

std::vector<GradCheckItem> gradcheck_activations(const GradCheckOptions& opt) {
    std::vector<GradCheckItem> out;
    for (const ScalarAct& s : standard_activation_suite()) out.push_back(gradcheck_scalar(s, opt));
    return out;
}

namespace {

// Loss of an untaped train-mode forward with a fresh dropout stream, so every
// evaluation sees the identical masks the taped pass drew.
double loss_eval(const ModelSpec& spec, ModelParams<double>& params, const Tensor64& x,
                 const Tensor64& one_hot, uint64_t drop_seed) {
    std::mt19937_64 rng(drop_seed);
    ForwardResult<double> r = forward(spec, params, x, Mode::train, &rng);
    return cross_entropy(r.value, one_hot);
}

}  // namespace

GradCheckItem gradcheck_architecture(const ModelSpec& spec, const ArchCheckOptions& opt) {
    GradCheckItem item{spec.name, 0.0, false};

    ModelParams<double> params = init_params<double>(spec, opt.seed);
    std::mt19937_64 data_rng(opt.seed + 1);
    std::uniform_real_distribution<double> pix(0.0, 1.0);
    Tensor64 x({opt.batch, spec.in_h, spec.in_w, spec.in_c});
    for (int64_t i = 0; i < x.size(); ++i) x[i] = pix(data_rng);
    Tensor64 one_hot({opt.batch, spec.num_classes});
    for (int i = 0; i < opt.batch; ++i) one_hot.at(i, i % spec.num_classes) = 1.0;

    const uint64_t drop_seed = opt.seed + 2;

    Tape<double> tape;
    std::mt19937_64 drop_rng(drop_seed);
    ForwardResult<double> f = forward(spec, params, x, Mode::train, &drop_rng, &tape);
    NodeId loss = tape.cross_entropy(f.node, tape.leaf(one_hot, false));
    tape.backward(loss);

    std::vector<ParamRef<double>> refs = trainable_refs(params);
    for (size_t t = 0; t < refs.size(); ++t) {
        Tensor64& p = *refs[t].tensor;
        const Tensor64& g = tape.grad(f.param_nodes[t]);
        std::vector<int64_t> coords;
        if (p.size() <= opt.coords_per_tensor) {
            coords.resize(size_t(p.size()));
            for (int64_t j = 0; j < p.size(); ++j) coords[size_t(j)] = j;
        } else {
            std::mt19937_64 crng(opt.seed + 100 + t);
            std::uniform_int_distribution<int64_t> cd(0, p.size() - 1);
            for (int j = 0; j < opt.coords_per_tensor; ++j) coords.push_back(cd(crng));
        }
        for (int64_t c : coords) {
            const double orig = p[c];
            p[c] = orig + opt.h;
            const double lp = loss_eval(spec, params, x, one_hot, drop_seed);
            p[c] = orig - opt.h;
            const double lm = loss_eval(spec, params, x, one_hot, drop_seed);
            p[c] = orig;
            const double fd = (lp - lm) / (2.0 * opt.h);
            item.max_rel_err = std::max(item.max_rel_err, grad_rel_err(g[c], fd));
        }
    }
    item.pass = item.max_rel_err <= opt.tol;
    return item;
}

std::vector<GradCheckItem> gradcheck_architectures(Activation act, const ArchCheckOptions& opt) {
    std::vector<GradCheckItem> out;
    out.push_back(gradcheck_architecture(build_mnist_cnn(act, 16), opt));
    out.push_back(gradcheck_architecture(build_flowers_cnn(act, 32), opt));
    out.push_back(gradcheck_architecture(build_cifar10_cnn(act, 16), opt));
    out.push_back(
        gradcheck_architecture(build_histo_cnn(act, 2, 32, 3, Padding::same), opt));
    return out;
}

}  // namespace nn
