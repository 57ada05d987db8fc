#include "nn/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nn {

int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), int64_t(0));
}

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& pred, int k) {
    if (truth.size() != pred.size())
        throw std::invalid_argument("confusion: label vectors differ in length");
    if (k < 1) throw std::invalid_argument("confusion: k must be positive");
    ConfusionMatrix cm(k);
    for (size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = pred[i];
        if (t < 0 || t >= k || p < 0 || p >= k)
            throw std::invalid_argument("confusion: label " + std::to_string(t < 0 || t >= k ? t : p) +
                                        " out of range [0," + std::to_string(k) + ")");
        ++cm.at(t, p);
    }
    return cm;
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
    if (truth.size() != pred.size())
        throw std::invalid_argument("accuracy: label vectors differ in length");
    if (truth.empty()) throw std::invalid_argument("accuracy: empty input");
    int64_t hits = 0;
    for (size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i];
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

MacroPRF macro_prf(const ConfusionMatrix& cm) {
    MacroPRF out;
    for (int c = 0; c < cm.k; ++c) {
        const int64_t tp = cm.at(c, c);
        int64_t fp = 0, fn = 0;
        for (int j = 0; j < cm.k; ++j) {
            if (j == c) continue;
            fp += cm.at(j, c);
            fn += cm.at(c, j);
        }
        const double p = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
        const double r = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
        const double f = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
        out.precision += p;
        out.recall += r;
        out.f1 += f;
    }
    out.precision /= cm.k;
    out.recall /= cm.k;
    out.f1 /= cm.k;
    return out;
}

namespace {

// Binary ROC AUC of `scores` against target (label == cls) by average ranks.
// Returns -1 when the class has no positives or no negatives.
double binary_auc(const std::vector<double>& scores, const std::vector<int>& labels, int cls) {
    const size_t n = scores.size();
    int64_t npos = 0;
    for (int l : labels) npos += l == cls;
    const int64_t nneg = static_cast<int64_t>(n) - npos;
    if (npos == 0 || nneg == 0) return -1.0;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Average ranks over runs of tied scores (1-based), summed for positives.
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (double(i + 1) + double(j));  // mean of ranks i+1..j
        for (size_t t = i; t < j; ++t)
            if (labels[order[t]] == cls) pos_rank_sum += avg_rank;
        i = j;
    }
    return (pos_rank_sum - 0.5 * double(npos) * double(npos + 1)) /
           (double(npos) * double(nneg));
}

}  // namespace

double macro_auc_ovr(const Tensor<double>& probs, const std::vector<int>& labels) {
    if (probs.ndim() != 2)
        throw ShapeError("macro_auc_ovr: expected (N,K), got " + shape_str(probs.shape()));
    const int n = probs.dim(0), k = probs.dim(1);
    if (static_cast<size_t>(n) != labels.size())
        throw std::invalid_argument("macro_auc_ovr: label count does not match rows");
    if (n < 2) throw std::invalid_argument("macro_auc_ovr: need at least 2 samples");

    double sum = 0.0;
    int defined = 0;
    std::vector<double> col(static_cast<size_t>(n));
    for (int c = 0; c < k; ++c) {
        for (int i = 0; i < n; ++i) col[static_cast<size_t>(i)] = probs.at(i, c);
        const double a = binary_auc(col, labels, c);
        if (a >= 0.0) {
            sum += a;
            ++defined;
        }
    }
    if (defined == 0)
        throw std::invalid_argument("macro_auc_ovr: no class has both positives and negatives");
    return sum / defined;
}

double macro_auc_ovr(const Tensor<float>& probs, const std::vector<int>& labels) {
    return macro_auc_ovr(probs.cast<double>(), labels);
}

namespace {

template <class T>
MetricValues evaluate_metrics_impl(const Tensor<T>& probs, const std::vector<int>& labels, int k) {
    const std::vector<int> pred = argmax_rows(probs);
    const ConfusionMatrix cm = confusion(labels, pred, k);
    const MacroPRF prf = macro_prf(cm);
    MetricValues m;
    m.accuracy = accuracy(labels, pred);
    m.macro_precision = prf.precision;
    m.macro_recall = prf.recall;
    m.macro_f1 = prf.f1;
    m.macro_auc = macro_auc_ovr(probs, labels);
    return m;
}

}  // namespace

MetricValues evaluate_metrics(const Tensor<float>& probs, const std::vector<int>& labels, int k) {
    return evaluate_metrics_impl(probs, labels, k);
}
MetricValues evaluate_metrics(const Tensor<double>& probs, const std::vector<int>& labels, int k) {
    return evaluate_metrics_impl(probs, labels, k);
}

MetricValues MetricsReport::mean() const {
    MetricValues m;
    if (folds.empty()) return m;
    for (const MetricValues& f : folds) {
        m.accuracy += f.accuracy;
        m.macro_precision += f.macro_precision;
        m.macro_recall += f.macro_recall;
        m.macro_f1 += f.macro_f1;
        m.macro_auc += f.macro_auc;
    }
    const double n = static_cast<double>(folds.size());
    m.accuracy /= n;
    m.macro_precision /= n;
    m.macro_recall /= n;
    m.macro_f1 /= n;
    m.macro_auc /= n;
    return m;
}

}  // namespace nn
