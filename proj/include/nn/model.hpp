#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nn/autodiff.hpp"

namespace nn {

inline constexpr double kBnEps = 1e-3;
inline constexpr double kBnMomentum = 0.99;

enum class LayerKind {
    conv2d,
    maxpool,
    dropout,
    batchnorm,
    dense,
    flatten,
    global_avg_pool,
    activation,
    softmax,
};

const char* kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind{};
    int filters = 0;              // conv2d
    int kernel = 0;               // conv2d
    Padding pad = Padding::valid; // conv2d
    int units = 0;                // dense
    double rate = 0.0;            // dropout
    Activation act{};             // activation
};

struct ModelSpec {
    std::string name;
    int in_h = 0, in_w = 0, in_c = 0;
    int num_classes = 0;
    std::vector<LayerSpec> layers;
};

// Builders for the four architectures. `hw` scales the spatial input size so
// the same topology can run as a toy network in gradient checks; defaults are
// the full-size inputs.
ModelSpec build_mnist_cnn(Activation act, int hw = 28);
ModelSpec build_flowers_cnn(Activation act, int hw = 32);
ModelSpec build_cifar10_cnn(Activation act, int hw = 32);
ModelSpec build_histo_cnn(Activation act, int classes = 2, int hw = 96, int channels = 3,
                          Padding conv_pad = Padding::valid);

ModelSpec build_model(const std::string& name, Activation act, int classes);

bool has_dropout(const ModelSpec& spec);

// Shapes of the parameter tensors each layer owns (empty when the layer has
// none). gamma's shape is shared by beta and both running stats.
struct LayerParamShapes {
    std::vector<int> kernel, bias, gamma;
};
std::vector<LayerParamShapes> param_shapes(const ModelSpec& spec);

// Output shape after every layer for the given batch size; throws ShapeError
// naming the offending layer when the composition is invalid.
std::vector<std::vector<int>> layer_output_shapes(const ModelSpec& spec, int batch);

int64_t trainable_param_count(const ModelSpec& spec);

template <class T>
struct LayerParams {
    Tensor<T> kernel, bias;                 // conv2d / dense
    Tensor<T> gamma, beta;                  // batchnorm
    Tensor<T> running_mean, running_var;    // batchnorm
};

template <class T>
struct ModelParams {
    std::vector<LayerParams<T>> layers;

    template <class U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        out.layers.reserve(layers.size());
        for (const LayerParams<T>& lp : layers) {
            LayerParams<U> o;
            if (!lp.kernel.empty()) o.kernel = lp.kernel.template cast<U>();
            if (!lp.bias.empty()) o.bias = lp.bias.template cast<U>();
            if (!lp.gamma.empty()) {
                o.gamma = lp.gamma.template cast<U>();
                o.beta = lp.beta.template cast<U>();
                o.running_mean = lp.running_mean.template cast<U>();
                o.running_var = lp.running_var.template cast<U>();
            }
            out.layers.push_back(std::move(o));
        }
        return out;
    }
};

template <class T>
struct ParamRef {
    int layer;
    std::string name;   // e.g. "layer0.kernel"
    Tensor<T>* tensor;
    bool trainable;
};

template <class T>
std::vector<ParamRef<T>> param_refs(ModelParams<T>& p) {
    std::vector<ParamRef<T>> out;
    for (int i = 0; i < static_cast<int>(p.layers.size()); ++i) {
        LayerParams<T>& lp = p.layers[i];
        const std::string base = "layer" + std::to_string(i) + ".";
        if (!lp.kernel.empty()) out.push_back({i, base + "kernel", &lp.kernel, true});
        if (!lp.bias.empty()) out.push_back({i, base + "bias", &lp.bias, true});
        if (!lp.gamma.empty()) {
            out.push_back({i, base + "gamma", &lp.gamma, true});
            out.push_back({i, base + "beta", &lp.beta, true});
            out.push_back({i, base + "running_mean", &lp.running_mean, false});
            out.push_back({i, base + "running_var", &lp.running_var, false});
        }
    }
    return out;
}

template <class T>
std::vector<ParamRef<T>> trainable_refs(ModelParams<T>& p) {
    std::vector<ParamRef<T>> out;
    for (ParamRef<T>& r : param_refs(p))
        if (r.trainable) out.push_back(r);
    return out;
}

// Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases,
// identity batch-norm. Draws in double so float and double params agree up to
// rounding for the same seed.
template <class T>
ModelParams<T> init_params(const ModelSpec& spec, uint64_t seed) {
    const std::vector<LayerParamShapes> shapes = param_shapes(spec);
    ModelParams<T> p;
    p.layers.resize(spec.layers.size());
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerParamShapes& ls = shapes[i];
        LayerParams<T>& lp = p.layers[i];
        if (!ls.kernel.empty()) {
            int64_t fan_in, fan_out;
            if (ls.kernel.size() == 4) {
                const int64_t rf = int64_t(ls.kernel[0]) * ls.kernel[1];
                fan_in = rf * ls.kernel[2];
                fan_out = rf * ls.kernel[3];
            } else {
                fan_in = ls.kernel[0];
                fan_out = ls.kernel[1];
            }
            const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-limit, limit);
            lp.kernel = Tensor<T>(ls.kernel);
            for (int64_t j = 0; j < lp.kernel.size(); ++j) lp.kernel[j] = static_cast<T>(dist(rng));
            lp.bias = Tensor<T>(ls.bias);
        }
        if (!ls.gamma.empty()) {
            lp.gamma = Tensor<T>::full(ls.gamma, T(1));
            lp.beta = Tensor<T>(ls.gamma);
            lp.running_mean = Tensor<T>(ls.gamma);
            lp.running_var = Tensor<T>::full(ls.gamma, T(1));
        }
    }
    return p;
}

enum class Mode { train, infer };

// Batch statistics produced by a batch-norm layer during a train-mode
// forward; the caller folds them into the running stats.
template <class T>
struct BnUpdate {
    int layer;
    BnStats<T> stats;
};

template <class T>
struct ForwardResult {
    Tensor<T> value;                    // network output (probabilities)
    NodeId node{};                      // output node when a tape was supplied
    std::vector<NodeId> param_nodes;    // aligned with trainable_refs(params)
    std::vector<BnUpdate<T>> bn_updates;
};

// Runs the network. With a tape, records every op for backward and exposes
// the trainable parameters as tape leaves; without one, computes values only.
// Train mode draws dropout masks from `rng` (identically in both paths, so a
// reseeded untaped forward reproduces a taped one) and normalizes with batch
// statistics; infer mode skips dropout and uses running statistics.
template <class T>
ForwardResult<T> forward(const ModelSpec& spec, ModelParams<T>& params, const Tensor<T>& input,
                         Mode mode, std::mt19937_64* rng = nullptr, Tape<T>* tape = nullptr) {
    const Shape4 in = as_shape4(input, "forward input");
    if (in.h != spec.in_h || in.w != spec.in_w || in.c != spec.in_c)
        throw ShapeError(spec.name + ": input " + shape_str(input.shape()) + " does not match (" +
                         std::to_string(spec.in_h) + "," + std::to_string(spec.in_w) + "," +
                         std::to_string(spec.in_c) + ")");
    if (params.layers.size() != spec.layers.size())
        throw ShapeError(spec.name + ": params built for a different layer count");
    if (mode == Mode::train && rng == nullptr && has_dropout(spec))
        throw std::invalid_argument(spec.name + ": train-mode forward needs an rng for dropout");

    ForwardResult<T> res;
    const T eps = static_cast<T>(kBnEps);
    Tensor<T> cur = input;
    NodeId curn;
    if (tape) curn = tape->leaf(input, false);

    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        LayerParams<T>& lp = params.layers[i];
        try {
            switch (l.kind) {
                case LayerKind::conv2d: {
                    if (tape) {
                        NodeId k = tape->leaf(lp.kernel, true), b = tape->leaf(lp.bias, true);
                        res.param_nodes.push_back(k);
                        res.param_nodes.push_back(b);
                        curn = tape->conv2d(curn, k, b, l.pad);
                    } else {
                        cur = nn::conv2d(cur, lp.kernel, lp.bias, l.pad);
                    }
                    break;
                }
                case LayerKind::maxpool: {
                    if (tape) curn = tape->maxpool2d(curn);
                    else cur = nn::maxpool2d(cur).y;
                    break;
                }
                case LayerKind::dropout: {
                    if (mode == Mode::train) {
                        if (tape) curn = tape->dropout(curn, l.rate, *rng);
                        else cur = dropout_train(cur, l.rate, *rng).y;
                    }
                    break;
                }
                case LayerKind::batchnorm: {
                    if (tape) {
                        NodeId g = tape->leaf(lp.gamma, true), b = tape->leaf(lp.beta, true);
                        res.param_nodes.push_back(g);
                        res.param_nodes.push_back(b);
                        if (mode == Mode::train) {
                            auto [n, st] = tape->batchnorm_train(curn, g, b, eps);
                            curn = n;
                            res.bn_updates.push_back({static_cast<int>(i), st});
                        } else {
                            curn = tape->batchnorm_infer(curn, g, b, lp.running_mean,
                                                         lp.running_var, eps);
                        }
                    } else {
                        if (mode == Mode::train) {
                            BnTrainOut<T> o = nn::batchnorm_train(cur, lp.gamma, lp.beta, eps);
                            cur = std::move(o.y);
                            res.bn_updates.push_back({static_cast<int>(i), o.stats});
                        } else {
                            cur = nn::batchnorm_infer(cur, lp.gamma, lp.beta, lp.running_mean,
                                                      lp.running_var, eps);
                        }
                    }
                    break;
                }
                case LayerKind::dense: {
                    if (tape) {
                        NodeId w = tape->leaf(lp.kernel, true), b = tape->leaf(lp.bias, true);
                        res.param_nodes.push_back(w);
                        res.param_nodes.push_back(b);
                        curn = tape->dense(curn, w, b);
                    } else {
                        cur = nn::dense(cur, lp.kernel, lp.bias);
                    }
                    break;
                }
                case LayerKind::flatten: {
                    if (tape) curn = tape->flatten(curn);
                    else cur = nn::flatten(cur);
                    break;
                }
                case LayerKind::global_avg_pool: {
                    if (tape) curn = tape->global_avg_pool(curn);
                    else cur = nn::global_avg_pool(cur);
                    break;
                }
                case LayerKind::activation: {
                    if (tape) curn = tape->activation(curn, l.act);
                    else cur = apply_activation(l.act, cur);
                    break;
                }
                case LayerKind::softmax: {
                    if (tape) curn = tape->softmax(curn);
                    else cur = nn::softmax(cur);
                    break;
                }
            }
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + " (" + kind_name(l.kind) +
                             "): " + e.what());
        }
    }

    if (tape) {
        res.node = curn;
        res.value = tape->value(curn);
    } else {
        res.value = std::move(cur);
    }
    return res;
}

// Folds a train-forward's batch statistics into the running estimates.
template <class T>
void apply_bn_updates(ModelParams<T>& params, const std::vector<BnUpdate<T>>& updates,
                      double momentum = kBnMomentum) {
    for (const BnUpdate<T>& u : updates) {
        LayerParams<T>& lp = params.layers[u.layer];
        bn_update_running(lp.running_mean, lp.running_var, u.stats, static_cast<T>(momentum));
    }
}

}  // namespace nn
