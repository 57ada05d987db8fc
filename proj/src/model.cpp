#include "nn/model.hpp"

#include <numeric>

namespace nn {

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::dropout: return "dropout";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::dense: return "dense";
        case LayerKind::flatten: return "flatten";
        case LayerKind::global_avg_pool: return "global_avg_pool";
        case LayerKind::activation: return "activation";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

namespace {

LayerSpec conv(int filters, int kernel, Padding pad) {
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.filters = filters;
    l.kernel = kernel;
    l.pad = pad;
    return l;
}
LayerSpec act(Activation a) {
    LayerSpec l;
    l.kind = LayerKind::activation;
    l.act = a;
    return l;
}
LayerSpec pool() { return LayerSpec{LayerKind::maxpool}; }
LayerSpec drop(double rate) {
    LayerSpec l;
    l.kind = LayerKind::dropout;
    l.rate = rate;
    return l;
}
LayerSpec bn() { return LayerSpec{LayerKind::batchnorm}; }
LayerSpec dense_l(int units) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.units = units;
    return l;
}
LayerSpec flat() { return LayerSpec{LayerKind::flatten}; }
LayerSpec gap() { return LayerSpec{LayerKind::global_avg_pool}; }
LayerSpec soft() { return LayerSpec{LayerKind::softmax}; }

}  // namespace

ModelSpec build_mnist_cnn(Activation a, int hw) {
    ModelSpec s;
    s.name = "mnist_cnn";
    s.in_h = s.in_w = hw;
    s.in_c = 1;
    s.num_classes = 10;
    s.layers = {conv(32, 3, Padding::valid), act(a), pool(), flat(), dense_l(10), soft()};
    return s;
}

ModelSpec build_flowers_cnn(Activation a, int hw) {
    ModelSpec s;
    s.name = "flowers_cnn";
    s.in_h = s.in_w = hw;
    s.in_c = 3;
    s.num_classes = 5;
    s.layers = {
        conv(32, 3, Padding::valid),  act(a), pool(), drop(0.25),
        conv(64, 3, Padding::valid),  act(a), pool(), drop(0.25),
        conv(128, 3, Padding::valid), act(a), drop(0.4),
        flat(),
        dense_l(128), act(a), drop(0.3),
        dense_l(5), soft(),
    };
    return s;
}

ModelSpec build_cifar10_cnn(Activation a, int hw) {
    ModelSpec s;
    s.name = "cifar10_cnn";
    s.in_h = s.in_w = hw;
    s.in_c = 3;
    s.num_classes = 10;
    const double rates[3] = {0.2, 0.3, 0.4};
    const int filters[3] = {32, 64, 128};
    for (int b = 0; b < 3; ++b) {
        s.layers.push_back(conv(filters[b], 3, Padding::same));
        s.layers.push_back(act(a));
        s.layers.push_back(bn());
        s.layers.push_back(conv(filters[b], 3, Padding::same));
        s.layers.push_back(act(a));
        s.layers.push_back(bn());
        s.layers.push_back(pool());
        s.layers.push_back(drop(rates[b]));
    }
    s.layers.push_back(flat());
    s.layers.push_back(dense_l(128));
    s.layers.push_back(act(a));
    s.layers.push_back(bn());
    s.layers.push_back(drop(0.5));
    s.layers.push_back(dense_l(10));
    s.layers.push_back(soft());
    return s;
}

ModelSpec build_histo_cnn(Activation a, int classes, int hw, int channels, Padding conv_pad) {
    if (classes < 2) throw std::invalid_argument("build_histo_cnn: classes must be >= 2");
    ModelSpec s;
    s.name = "histo_cnn";
    s.in_h = s.in_w = hw;
    s.in_c = channels;
    s.num_classes = classes;
    const int filters[5] = {32, 64, 128, 256, 512};
    const double rates[5] = {0.1, 0.2, 0.3, 0.4, 0.5};
    for (int b = 0; b < 5; ++b) {
        s.layers.push_back(conv(filters[b], b == 0 ? 5 : 3, conv_pad));
        s.layers.push_back(act(a));
        s.layers.push_back(pool());
        s.layers.push_back(bn());
        s.layers.push_back(drop(rates[b]));
    }
    s.layers.push_back(gap());
    s.layers.push_back(act(a));
    s.layers.push_back(bn());
    s.layers.push_back(drop(0.3));
    s.layers.push_back(dense_l(256));
    s.layers.push_back(act(a));
    s.layers.push_back(bn());
    s.layers.push_back(drop(0.4));
    s.layers.push_back(dense_l(classes));
    s.layers.push_back(soft());
    return s;
}

ModelSpec build_model(const std::string& name, Activation a, int classes) {
    if (name == "mnist_cnn") return build_mnist_cnn(a);
    if (name == "flowers_cnn") return build_flowers_cnn(a);
    if (name == "cifar10_cnn") return build_cifar10_cnn(a);
    if (name == "histo_cnn") return build_histo_cnn(a, classes > 0 ? classes : 2);
    throw std::invalid_argument("unknown model '" + name +
                                "' (expected mnist_cnn|flowers_cnn|cifar10_cnn|histo_cnn)");
}

bool has_dropout(const ModelSpec& spec) {
    for (const LayerSpec& l : spec.layers)
        if (l.kind == LayerKind::dropout && l.rate > 0.0) return true;
    return false;
}

namespace {

// Walks the layer list tracking the activation shape, filling param shapes as
// it goes. Shared by param_shapes and layer_output_shapes.
void propagate(const ModelSpec& spec, int batch, std::vector<LayerParamShapes>* pshapes,
               std::vector<std::vector<int>>* oshapes) {
    std::vector<int> cur = {batch, spec.in_h, spec.in_w, spec.in_c};
    auto fail = [](size_t i, LayerKind k, const std::string& msg) {
        throw ShapeError("layer " + std::to_string(i) + " (" + std::string(kind_name(k)) +
                         "): " + msg);
    };
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        LayerParamShapes ps;
        switch (l.kind) {
            case LayerKind::conv2d: {
                if (cur.size() != 4) fail(i, l.kind, "expects 4-d input, got " + shape_str(cur));
                if (l.pad == Padding::valid && (cur[1] < l.kernel || cur[2] < l.kernel))
                    fail(i, l.kind, "kernel " + std::to_string(l.kernel) + " too large for " +
                                        shape_str(cur));
                const int h = conv_out_dim(cur[1], l.kernel, l.pad);
                const int w = conv_out_dim(cur[2], l.kernel, l.pad);
                ps.kernel = {l.kernel, l.kernel, cur[3], l.filters};
                ps.bias = {l.filters};
                cur = {cur[0], h, w, l.filters};
                break;
            }
            case LayerKind::maxpool: {
                if (cur.size() != 4) fail(i, l.kind, "expects 4-d input, got " + shape_str(cur));
                if (cur[1] < 2 || cur[2] < 2)
                    fail(i, l.kind, "input too small to pool: " + shape_str(cur));
                cur = {cur[0], (cur[1] - 2) / 2 + 1, (cur[2] - 2) / 2 + 1, cur[3]};
                break;
            }
            case LayerKind::batchnorm: {
                if (cur.size() != 2 && cur.size() != 4)
                    fail(i, l.kind, "expects 2-d or 4-d input, got " + shape_str(cur));
                ps.gamma = {cur.back()};
                break;
            }
            case LayerKind::dense: {
                if (cur.size() != 2) fail(i, l.kind, "expects 2-d input, got " + shape_str(cur));
                ps.kernel = {cur[1], l.units};
                ps.bias = {l.units};
                cur = {cur[0], l.units};
                break;
            }
            case LayerKind::flatten: {
                int64_t d = 1;
                for (size_t j = 1; j < cur.size(); ++j) d *= cur[j];
                cur = {cur[0], static_cast<int>(d)};
                break;
            }
            case LayerKind::global_avg_pool: {
                if (cur.size() != 4) fail(i, l.kind, "expects 4-d input, got " + shape_str(cur));
                cur = {cur[0], cur[3]};
                break;
            }
            case LayerKind::softmax: {
                if (cur.size() != 2 || cur[1] < 2)
                    fail(i, l.kind, "expects (N,K>=2) input, got " + shape_str(cur));
                break;
            }
            case LayerKind::dropout:
            case LayerKind::activation:
                break;
        }
        if (pshapes) pshapes->push_back(std::move(ps));
        if (oshapes) oshapes->push_back(cur);
    }
}

}  // namespace

std::vector<LayerParamShapes> param_shapes(const ModelSpec& spec) {
    std::vector<LayerParamShapes> out;
    out.reserve(spec.layers.size());
    propagate(spec, 1, &out, nullptr);
    return out;
}

std::vector<std::vector<int>> layer_output_shapes(const ModelSpec& spec, int batch) {
    std::vector<std::vector<int>> out;
    out.reserve(spec.layers.size());
    propagate(spec, batch, nullptr, &out);
    return out;
}

int64_t trainable_param_count(const ModelSpec& spec) {
    int64_t n = 0;
    for (const LayerParamShapes& ps : param_shapes(spec)) {
        auto prod = [](const std::vector<int>& s) {
            return s.empty() ? int64_t(0)
                             : std::accumulate(s.begin(), s.end(), int64_t(1),
                                               [](int64_t a, int b) { return a * b; });
        };
        n += prod(ps.kernel) + prod(ps.bias) + 2 * prod(ps.gamma);
    }
    return n;
}

}  // namespace nn
