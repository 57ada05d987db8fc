#pragma once

#include <cstdint>
#include <vector>

#include "nn/tensor.hpp"

namespace nn {

// K x K counts; entry (i,j) = samples of true class i predicted as class j.
struct ConfusionMatrix {
    int k = 0;
    std::vector<int64_t> counts;

    explicit ConfusionMatrix(int k_) : k(k_), counts(static_cast<size_t>(k_) * k_, 0) {}
    int64_t& at(int i, int j) { return counts[static_cast<size_t>(i) * k + j]; }
    int64_t at(int i, int j) const { return counts[static_cast<size_t>(i) * k + j]; }
    int64_t total() const;
};

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& pred, int k);

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred);

struct MacroPRF {
    double precision = 0, recall = 0, f1 = 0;
};
// Per-class P/R/F1 with the 0/0 -> 0 convention, averaged unweighted.
MacroPRF macro_prf(const ConfusionMatrix& cm);

// Macro one-vs-rest ROC AUC via the rank (Mann-Whitney) formulation, ties at
// half credit. Classes with no positives or no negatives are skipped; throws
// std::invalid_argument if that leaves nothing.
double macro_auc_ovr(const Tensor<double>& probs, const std::vector<int>& labels);
double macro_auc_ovr(const Tensor<float>& probs, const std::vector<int>& labels);

// Row-wise argmax with lowest-index tie-break.
template <class T>
std::vector<int> argmax_rows(const Tensor<T>& probs) {
    if (probs.ndim() != 2) throw ShapeError("argmax_rows: expected (N,K), got " + shape_str(probs.shape()));
    const int n = probs.dim(0), k = probs.dim(1);
    std::vector<int> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const T* row = probs.data() + static_cast<int64_t>(i) * k;
        int best = 0;
        for (int j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

struct MetricValues {
    double accuracy = 0;
    double macro_precision = 0;
    double macro_recall = 0;
    double macro_f1 = 0;
    double macro_auc = 0;
};

// Evaluates the full metric set for one fold's predictions.
MetricValues evaluate_metrics(const Tensor<float>& probs, const std::vector<int>& labels, int k);
MetricValues evaluate_metrics(const Tensor<double>& probs, const std::vector<int>& labels, int k);

struct MetricsReport {
    std::vector<MetricValues> folds;
    MetricValues mean() const;
};

}  // namespace nn
