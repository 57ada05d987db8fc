#include <cmath>
#include <random>

#include "doctest.h"
#include "nn/gradcheck.hpp"
#include "nn/model.hpp"
#include "oracles.hpp"

using namespace nn;
using doctest::Approx;

namespace {

const Activation kAct{ActivationKind::pltanh, 0.01};

std::vector<LayerKind> kinds_of(const ModelSpec& s) {
    std::vector<LayerKind> out;
    for (const LayerSpec& l : s.layers) out.push_back(l.kind);
    return out;
}

std::vector<double> dropout_rates(const ModelSpec& s) {
    std::vector<double> out;
    for (const LayerSpec& l : s.layers)
        if (l.kind == LayerKind::dropout) out.push_back(l.rate);
    return out;
}

std::vector<int> conv_filters(const ModelSpec& s) {
    std::vector<int> out;
    for (const LayerSpec& l : s.layers)
        if (l.kind == LayerKind::conv2d) out.push_back(l.filters);
    return out;
}

}  // namespace

TEST_CASE("mnist_cnn layer list and parameter count") {
    const ModelSpec s = build_mnist_cnn(kAct);
    const std::vector<LayerKind> want = {LayerKind::conv2d, LayerKind::activation,
                                         LayerKind::maxpool, LayerKind::flatten, LayerKind::dense,
                                         LayerKind::softmax};
    CHECK(kinds_of(s) == want);
    CHECK(s.layers.size() == 6);
    CHECK(s.layers[0].filters == 32);
    CHECK(s.layers[0].kernel == 3);
    CHECK(s.layers[0].pad == Padding::valid);
    CHECK(s.layers[4].units == 10);
    // 32*(3*3*1)+32 kernel+bias, then (13*13*32)*10+10 for the head.
    CHECK(trainable_param_count(s) == 54410);
}

TEST_CASE("flowers_cnn layer list") {
    const ModelSpec s = build_flowers_cnn(kAct);
    CHECK(s.in_h == 32);
    CHECK(s.in_c == 3);
    CHECK(s.num_classes == 5);
    CHECK(conv_filters(s) == std::vector<int>{32, 64, 128});
    CHECK(dropout_rates(s) == std::vector<double>{0.25, 0.25, 0.4, 0.3});
    // Two pooled blocks, then a conv block without pooling.
    int pools = 0;
    for (const LayerSpec& l : s.layers) pools += l.kind == LayerKind::maxpool;
    CHECK(pools == 2);
    // Head: flatten -> dense(128) -> act -> drop -> dense(5) -> softmax.
    const size_t n = s.layers.size();
    CHECK(s.layers[n - 2].kind == LayerKind::dense);
    CHECK(s.layers[n - 2].units == 5);
    CHECK(s.layers[n - 1].kind == LayerKind::softmax);
    CHECK(s.layers[n - 5].units == 128);
}

TEST_CASE("cifar10_cnn layer list") {
    const ModelSpec s = build_cifar10_cnn(kAct);
    CHECK(conv_filters(s) == std::vector<int>{32, 32, 64, 64, 128, 128});
    CHECK(dropout_rates(s) == std::vector<double>{0.2, 0.3, 0.4, 0.5});
    for (const LayerSpec& l : s.layers)
        if (l.kind == LayerKind::conv2d) {
            CHECK(l.pad == Padding::same);
            CHECK(l.kernel == 3);
        }
    // Each conv is followed by activation then batchnorm.
    for (size_t i = 0; i < s.layers.size(); ++i)
        if (s.layers[i].kind == LayerKind::conv2d) {
            REQUIRE(i + 2 < s.layers.size());
            CHECK(s.layers[i + 1].kind == LayerKind::activation);
            CHECK(s.layers[i + 2].kind == LayerKind::batchnorm);
        }
    CHECK(s.num_classes == 10);
    // Spatial trace: 32 -> 16 -> 8 -> 4 across the three pools.
    const auto shapes = layer_output_shapes(s, 1);
    std::vector<int> pooled;
    for (size_t i = 0; i < s.layers.size(); ++i)
        if (s.layers[i].kind == LayerKind::maxpool) pooled.push_back(shapes[i][1]);
    CHECK(pooled == std::vector<int>{16, 8, 4});
}

TEST_CASE("histo_cnn layer list") {
    const ModelSpec s = build_histo_cnn(kAct);
    CHECK(conv_filters(s) == std::vector<int>{32, 64, 128, 256, 512});
    CHECK(dropout_rates(s) == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.3, 0.4});
    CHECK(s.layers[0].kernel == 5);
    int threes = 0;
    for (const LayerSpec& l : s.layers)
        if (l.kind == LayerKind::conv2d && l.kernel == 3) ++threes;
    CHECK(threes == 4);
    CHECK(s.num_classes == 2);
    // Head: gap -> act -> bn -> drop -> dense(256) -> act -> bn -> drop -> dense(2) -> softmax.
    bool saw_gap = false;
    for (const LayerSpec& l : s.layers) saw_gap |= l.kind == LayerKind::global_avg_pool;
    CHECK(saw_gap);
    const size_t n = s.layers.size();
    CHECK(s.layers[n - 2].units == 2);
    CHECK_THROWS_AS(build_histo_cnn(kAct, 1), std::invalid_argument);
}

TEST_CASE("build_model dispatch") {
    CHECK(build_model("mnist_cnn", kAct, 0).name == "mnist_cnn");
    CHECK(build_model("histo_cnn", kAct, 3).num_classes == 3);
    CHECK_THROWS_AS(build_model("vgg16", kAct, 0), std::invalid_argument);
}

TEST_CASE("layer_output_shapes validates composition and names the layer") {
    const ModelSpec good = build_mnist_cnn(kAct);
    const auto shapes = layer_output_shapes(good, 2);
    CHECK(shapes[0] == std::vector<int>{2, 26, 26, 32});
    CHECK(shapes[2] == std::vector<int>{2, 13, 13, 32});
    CHECK(shapes[3] == std::vector<int>{2, 13 * 13 * 32});
    CHECK(shapes.back() == std::vector<int>{2, 10});

    // histo at 32x32 with valid padding runs out of pixels at a conv layer.
    const ModelSpec bad = build_histo_cnn(kAct, 2, 32, 3, Padding::valid);
    try {
        layer_output_shapes(bad, 1);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("layer") != std::string::npos);
        CHECK(std::string(e.what()).find("conv2d") != std::string::npos);
    }
}

TEST_CASE("parameter shapes are invariant across activation choices") {
    for (const char* name : {"mnist_cnn", "flowers_cnn", "cifar10_cnn", "histo_cnn"}) {
        const ModelSpec a = build_model(name, Activation{ActivationKind::relu, 0.0}, 0);
        const ModelSpec b = build_model(name, Activation{ActivationKind::pltanh, 0.4}, 0);
        const auto sa = param_shapes(a), sb = param_shapes(b);
        REQUIRE(sa.size() == sb.size());
        for (size_t i = 0; i < sa.size(); ++i) {
            CHECK(sa[i].kernel == sb[i].kernel);
            CHECK(sa[i].bias == sb[i].bias);
            CHECK(sa[i].gamma == sb[i].gamma);
        }
        CHECK(trainable_param_count(a) == trainable_param_count(b));
    }
}

TEST_CASE("init_params is deterministic per seed, biases zero, bn identity") {
    const ModelSpec s = build_flowers_cnn(kAct);
    ModelParams<float> p1 = init_params<float>(s, 99);
    ModelParams<float> p2 = init_params<float>(s, 99);
    ModelParams<float> p3 = init_params<float>(s, 100);

    auto r1 = param_refs(p1), r2 = param_refs(p2), r3 = param_refs(p3);
    REQUIRE(r1.size() == r2.size());
    bool any_diff_seed100 = false;
    for (size_t i = 0; i < r1.size(); ++i) {
        REQUIRE(r1[i].tensor->size() == r2[i].tensor->size());
        for (int64_t j = 0; j < r1[i].tensor->size(); ++j) {
            CHECK((*r1[i].tensor)[j] == (*r2[i].tensor)[j]);
            if ((*r1[i].tensor)[j] != (*r3[i].tensor)[j]) any_diff_seed100 = true;
        }
    }
    CHECK(any_diff_seed100);

    for (size_t li = 0; li < p1.layers.size(); ++li) {
        const LayerParams<float>& lp = p1.layers[li];
        for (int64_t j = 0; j < lp.bias.size(); ++j) CHECK(lp.bias[j] == 0.0f);
        for (int64_t j = 0; j < lp.gamma.size(); ++j) {
            CHECK(lp.gamma[j] == 1.0f);
            CHECK(lp.beta[j] == 0.0f);
            CHECK(lp.running_mean[j] == 0.0f);
            CHECK(lp.running_var[j] == 1.0f);
        }
    }
}

TEST_CASE("glorot weights center on zero within 3 sigma") {
    // The flowers dense(128) kernel has 2048*128 = 262144 draws.
    const ModelSpec s = build_flowers_cnn(kAct);
    ModelParams<double> p = init_params<double>(s, 1234);
    const auto shapes = param_shapes(s);
    for (size_t li = 0; li < s.layers.size(); ++li) {
        if (shapes[li].kernel.size() != 2) continue;
        const Tensor64& w = p.layers[li].kernel;
        if (w.size() < 10000) continue;
        const double fan_in = shapes[li].kernel[0], fan_out = shapes[li].kernel[1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        double mean = 0;
        for (int64_t j = 0; j < w.size(); ++j) mean += w[j];
        mean /= double(w.size());
        const double sigma_mean = limit / std::sqrt(3.0 * double(w.size()));
        CHECK(std::abs(mean) < 3.0 * sigma_mean);
        // And every draw respects the limit.
        for (int64_t j = 0; j < w.size(); ++j) REQUIRE(std::abs(w[j]) <= limit);
    }
}

TEST_CASE("infer forward is deterministic and rows sum to one") {
    const ModelSpec s = build_flowers_cnn(kAct);
    ModelParams<float> p = init_params<float>(s, 7);
    std::mt19937_64 rng(8);
    Tensor64 xd = oracle::random_tensor({3, 32, 32, 3}, rng, 0.0, 1.0);
    Tensor<float> x = xd.cast<float>();

    ForwardResult<float> a = forward(s, p, x, Mode::infer);
    ForwardResult<float> b = forward(s, p, x, Mode::infer);
    CHECK(a.value.same_shape(Tensor<float>({3, 5})));
    for (int64_t i = 0; i < a.value.size(); ++i) CHECK(a.value[i] == b.value[i]);
    for (int i = 0; i < 3; ++i) {
        double sum = 0;
        for (int j = 0; j < 5; ++j) sum += a.value.at(i, j);
        CHECK(sum == Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("taped and untaped train forwards agree given the same rng") {
    const ModelSpec s = build_cifar10_cnn(kAct, 16);
    ModelParams<double> p = init_params<double>(s, 21);
    std::mt19937_64 rng(22);
    Tensor64 x = oracle::random_tensor({2, 16, 16, 3}, rng, 0.0, 1.0);

    std::mt19937_64 d1(33), d2(33);
    Tape<double> tape;
    ForwardResult<double> taped = forward(s, p, x, Mode::train, &d1, &tape);
    ForwardResult<double> plain = forward(s, p, x, Mode::train, &d2);
    REQUIRE(taped.value.same_shape(plain.value));
    for (int64_t i = 0; i < plain.value.size(); ++i) CHECK(taped.value[i] == plain.value[i]);
    REQUIRE(taped.bn_updates.size() == plain.bn_updates.size());
}

TEST_CASE("forward rejects mismatched input and missing rng") {
    const ModelSpec s = build_mnist_cnn(kAct);
    ModelParams<float> p = init_params<float>(s, 1);
    Tensor<float> wrong({1, 27, 28, 1});
    CHECK_THROWS_AS(forward(s, p, wrong, Mode::infer), ShapeError);

    const ModelSpec f = build_flowers_cnn(kAct);
    ModelParams<float> fp = init_params<float>(f, 1);
    Tensor<float> x({1, 32, 32, 3});
    CHECK_THROWS_AS(forward(f, fp, x, Mode::train), std::invalid_argument);
}

TEST_CASE("whole-network gradient check on a toy batch") {
    ArchCheckOptions opt;
    opt.coords_per_tensor = 10;
    const GradCheckItem item = gradcheck_architecture(build_mnist_cnn(kAct, 16), opt);
    INFO("max rel err ", item.max_rel_err);
    CHECK(item.pass);
}
