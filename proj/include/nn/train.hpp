#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "nn/data.hpp"
#include "nn/metrics.hpp"
#include "nn/model.hpp"

namespace nn {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 128;
    double learning_rate = 1e-3;
    uint64_t seed = 42;
};

// Training allocates and frees multi-megabyte tensors every batch. Under
// glibc's default 128 KB mmap threshold each of those goes through
// mmap/munmap, so every batch pays page faults and kernel zeroing for the
// same buffers over and over. Raising the threshold keeps them on the heap,
// where freed blocks are recycled; the matching trim threshold stops free()
// from handing the memory back to the kernel between batches.
inline void tune_allocator_for_training() {
#if defined(__GLIBC__)
    static const bool done = [] {
        mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
        mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
        return true;
    }();
    (void)done;
#endif
}

// Mean over the batch of -log(p_true), p clamped to >= 1e-12.
template <class T>
T cross_entropy(const Tensor<T>& probs, const Tensor<T>& one_hot) {
    if (!probs.same_shape(one_hot) || probs.ndim() != 2)
        throw ShapeError("cross_entropy: expected matching (N,K) tensors, got " +
                         shape_str(probs.shape()) + " and " + shape_str(one_hot.shape()));
    T loss = T(0);
    for (int64_t i = 0; i < probs.size(); ++i)
        if (one_hot[i] != T(0)) loss -= one_hot[i] * std::log(std::max(probs[i], T(1e-12)));
    return loss / static_cast<T>(probs.dim(0));
}

template <class T>
struct AdamState {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-7;
    int64_t t = 0;
    std::vector<Tensor<T>> m, v;

    static AdamState init(const std::vector<ParamRef<T>>& refs, double lr = 1e-3) {
        AdamState s;
        s.lr = lr;
        s.m.reserve(refs.size());
        s.v.reserve(refs.size());
        for (const ParamRef<T>& r : refs) {
            s.m.emplace_back(r.tensor->shape());
            s.v.emplace_back(r.tensor->shape());
        }
        return s;
    }
};

// Bias-corrected Adam: p -= lr * m_hat / (sqrt(v_hat) + eps).
template <class T>
void adam_step(std::vector<ParamRef<T>>& refs, const std::vector<const Tensor<T>*>& grads,
               AdamState<T>& s) {
    if (refs.size() != grads.size() || refs.size() != s.m.size())
        throw std::invalid_argument("adam_step: param/grad/state counts differ");
    s.t += 1;
    const T b1 = static_cast<T>(s.beta1), b2 = static_cast<T>(s.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(s.beta1, double(s.t)));
    const T c2 = static_cast<T>(1.0 - std::pow(s.beta2, double(s.t)));
    const T lr = static_cast<T>(s.lr), eps = static_cast<T>(s.eps);
    for (size_t i = 0; i < refs.size(); ++i) {
        Tensor<T>& p = *refs[i].tensor;
        const Tensor<T>& g = *grads[i];
        if (!p.same_shape(g))
            throw ShapeError("adam_step: grad shape " + shape_str(g.shape()) +
                             " does not match param " + refs[i].name);
        Tensor<T>&m = s.m[i], &v = s.v[i];
        T* pp = p.data();
        const T* gp = g.data();
        T* mp = m.data();
        T* vp = v.data();
        for (int64_t j = 0; j < p.size(); ++j) {
            mp[j] = b1 * mp[j] + (T(1) - b1) * gp[j];
            vp[j] = b2 * vp[j] + (T(1) - b2) * gp[j] * gp[j];
            const T mhat = mp[j] / c1;
            const T vhat = vp[j] / c2;
            pp[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

struct DivergenceError : std::runtime_error {
    int fold, epoch, batch;
    DivergenceError(int epoch_, int batch_, int fold_ = -1)
        : std::runtime_error((fold_ >= 0 ? "fold " + std::to_string(fold_) + ": " : std::string()) +
                             "loss diverged at epoch " + std::to_string(epoch_) + ", batch " +
                             std::to_string(batch_)),
          fold(fold_),
          epoch(epoch_),
          batch(batch_) {}
};

template <class T>
struct FoldResult {
    ModelParams<T> params;
    std::vector<double> loss_curve;  // per-epoch mean training loss
    MetricValues metrics;            // on the validation split, infer mode
};

// Batched infer-mode predictions over the given sample indices.
template <class T>
Tensor<T> predict_probs(const ModelSpec& spec, ModelParams<T>& params, const Dataset& ds,
                        const std::vector<int>& indices, int batch_size) {
    const int n = static_cast<int>(indices.size());
    Tensor<T> out({n, spec.num_classes});
    for (size_t pos = 0; pos < indices.size(); pos += size_t(batch_size)) {
        const size_t end = std::min(pos + size_t(batch_size), indices.size());
        Batch b = gather_batch(ds, indices, pos, end);
        Tensor<T> x = b.images.cast<T>();
        ForwardResult<T> r = forward(spec, params, x, Mode::infer);
        std::copy_n(r.value.data(), r.value.size(),
                    out.data() + int64_t(pos) * spec.num_classes);
    }
    return out;
}

template <class T = float>
FoldResult<T> train_fold(const ModelSpec& spec, const Dataset& ds, const FoldSplit& fold,
                         const TrainConfig& cfg) {
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.learning_rate <= 0.0)
        throw std::invalid_argument("train_fold: invalid config");
    tune_allocator_for_training();
    const uint64_t fold_seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL * uint64_t(fold.fold + 1));

    FoldResult<T> res;
    res.params = init_params<T>(spec, fold_seed);
    std::vector<ParamRef<T>> refs = trainable_refs(res.params);
    AdamState<T> adam = AdamState<T>::init(refs, cfg.learning_rate);
    BatchIter it(ds, fold.train, cfg.batch_size, fold_seed + 1);
    std::mt19937_64 dropout_rng(fold_seed + 2);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        it.start_epoch(epoch);
        double epoch_loss = 0.0;
        int batches = 0;
        Batch batch;
        while (it.next(batch)) {
            Tape<T> tape;
            Tensor<T> x = batch.images.cast<T>();
            Tensor<T> y = batch.one_hot.cast<T>();
            ForwardResult<T> f = forward(spec, res.params, x, Mode::train, &dropout_rng, &tape);
            NodeId yid = tape.leaf(y, false);
            NodeId loss = tape.cross_entropy(f.node, yid);
            const double lv = double(tape.value(loss)[0]);
            if (!std::isfinite(lv)) throw DivergenceError(epoch, batches);
            tape.backward(loss);
            std::vector<const Tensor<T>*> grads;
            grads.reserve(f.param_nodes.size());
            for (NodeId n : f.param_nodes) grads.push_back(&tape.grad(n));
            adam_step(refs, grads, adam);
            apply_bn_updates(res.params, f.bn_updates);
            epoch_loss += lv;
            ++batches;
        }
        res.loss_curve.push_back(epoch_loss / std::max(batches, 1));
    }

    Tensor<T> probs = predict_probs(spec, res.params, ds, fold.val, cfg.batch_size);
    std::vector<int> labels(fold.val.size());
    for (size_t i = 0; i < fold.val.size(); ++i) labels[i] = ds.labels[size_t(fold.val[i])];
    res.metrics = evaluate_metrics(probs, labels, ds.num_classes);
    return res;
}

// 5-fold cross-validation; the report's mean() is the headline figure.
template <class T = float>
MetricsReport run_experiment(const ModelSpec& spec, const Dataset& ds, const TrainConfig& cfg,
                             int k = 5) {
    const std::vector<FoldSplit> folds = kfold_split(ds.size(), k, cfg.seed);
    MetricsReport report;
    for (const FoldSplit& f : folds) {
        try {
            report.folds.push_back(train_fold<T>(spec, ds, f, cfg).metrics);
        } catch (const DivergenceError& e) {
            throw DivergenceError(e.epoch, e.batch, f.fold);
        }
    }
    return report;
}

struct SweepRow {
    double alpha;
    MetricsReport report;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    size_t best = 0;  // argmax mean accuracy, lowest alpha on ties
};

// One run_experiment per alpha with a shared seed. `build` maps alpha to the
// ModelSpec to train (the activation under sweep is PLTanh).
template <class BuildFn>
SweepResult alpha_sweep(BuildFn&& build, const Dataset& ds, const TrainConfig& cfg,
                        const std::vector<double>& alphas, int k = 5) {
    if (alphas.empty()) throw std::invalid_argument("alpha_sweep: empty alpha list");
    for (double a : alphas)
        if (!(a >= 0.0)) throw std::invalid_argument("alpha_sweep: alpha must be >= 0");
    SweepResult out;
    for (double a : alphas) {
        ModelSpec spec = build(a);
        out.rows.push_back({a, run_experiment(spec, ds, cfg, k)});
    }
    for (size_t i = 1; i < out.rows.size(); ++i) {
        const double acc = out.rows[i].report.mean().accuracy;
        const double best_acc = out.rows[out.best].report.mean().accuracy;
        if (acc > best_acc || (acc == best_acc && out.rows[i].alpha < out.rows[out.best].alpha))
            out.best = i;
    }
    return out;
}

}  // namespace nn
