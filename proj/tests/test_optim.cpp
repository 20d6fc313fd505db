#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dncnn/gradcheck.hpp"
#include "dncnn/model.hpp"
#include "dncnn/optim.hpp"
#include "support/synthetic.hpp"

using namespace dncnn;

namespace {

struct Scalar1 {
    VectorX<double> w = VectorX<double>::Zero(1);
    VectorX<double> g = VectorX<double>::Zero(1);
    std::vector<GradPair<double>> pairs() {
        return {GradPair<double>(Eigen::Map<VectorX<double>>(w.data(), 1), Eigen::Map<const VectorX<double>>(g.data(), 1))};
    }
};

} // namespace

TEST_CASE("sgd: zero gradient with zero momentum is the identity") {
    VectorX<float> w = VectorX<float>::LinSpaced(5, -1, 1), g = VectorX<float>::Zero(5);
    const VectorX<float> before = w;
    Optimizer<float> opt({OptimizerKind::SgdMomentum, 0.5, 0.0});
    std::vector<GradPair<float>> p{GradPair<float>(Eigen::Map<VectorX<float>>(w.data(), 5),
                                                   Eigen::Map<const VectorX<float>>(g.data(), 5))};
    for (int i = 0; i < 3; ++i) opt.step(p);
    CHECK(w == before);
    CHECK(opt.step_count() == 3);
}

TEST_CASE("sgd: one step of lr 0.1 on gradient 1") {
    Scalar1 s;
    s.g[0] = 1;
    auto p = s.pairs();
    Optimizer<double> opt({OptimizerKind::SgdMomentum, 0.1, 0.9});
    opt.step(p);
    CHECK(s.w[0] == doctest::Approx(-0.1).epsilon(1e-15));
    opt.step(p);  // v = 0.9 * 1 + 1
    CHECK(s.w[0] == doctest::Approx(-0.1 - 0.19).epsilon(1e-12));
}

TEST_CASE("adam: minimizes w^2 from 1 within 200 steps at lr 0.1") {
    Scalar1 s;
    s.w[0] = 1;
    auto p = s.pairs();
    OptimizerConfig cfg;
    cfg.lr = 0.1;
    Optimizer<double> opt(cfg);
    for (int i = 0; i < 200; ++i) {
        s.g[0] = 2 * s.w[0];
        opt.step(p);
    }
    CHECK(std::abs(s.w[0]) < 1e-2);
}

TEST_CASE("adam: first step moves each coordinate by lr against its gradient sign") {
    VectorX<double> w = VectorX<double>::Zero(3), g(3);
    g << 3, -1e-3, 0;
    std::vector<GradPair<double>> p{GradPair<double>(Eigen::Map<VectorX<double>>(w.data(), 3),
                                                     Eigen::Map<const VectorX<double>>(g.data(), 3))};
    OptimizerConfig cfg;
    cfg.lr = 0.01;
    Optimizer<double> opt(cfg);
    opt.step(p);
    CHECK(w[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(0.01).epsilon(1e-4));
    CHECK(w[2] == 0);
}

TEST_CASE("clipping scales the global gradient norm") {
    Scalar1 s;
    s.g[0] = 10;
    auto p = s.pairs();
    OptimizerConfig cfg{OptimizerKind::SgdMomentum, 1.0, 0.0};
    cfg.max_grad_norm = 2.0;
    Optimizer<double> opt(cfg);
    opt.step(p);
    CHECK(s.w[0] == doctest::Approx(-2.0));
}

TEST_CASE("optimizer configuration and shape errors") {
    CHECK_THROWS_AS(Optimizer<float>({OptimizerKind::Adam, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(Optimizer<float>({OptimizerKind::Adam, 1e-3, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(optimizer_kind_from_string("rmsprop"), std::invalid_argument);
    CHECK(optimizer_kind_from_string("sgd") == OptimizerKind::SgdMomentum);
    CHECK(to_string(OptimizerKind::Adam) == "adam");

    Scalar1 a;
    auto pa = a.pairs();
    Optimizer<double> opt(OptimizerConfig{});
    opt.step(pa);
    VectorX<double> w2 = VectorX<double>::Zero(2), g2 = VectorX<double>::Zero(2);
    std::vector<GradPair<double>> pb{GradPair<double>(Eigen::Map<VectorX<double>>(w2.data(), 2),
                                                      Eigen::Map<const VectorX<double>>(g2.data(), 2))};
    CHECK_THROWS_AS(opt.step(pb), ShapeError);
    CHECK_THROWS_AS(GradPair<double>(Eigen::Map<VectorX<double>>(w2.data(), 2),
                                     Eigen::Map<const VectorX<double>>(g2.data(), 1)),
                    ShapeError);
}

TEST_CASE("learning-rate schedule") {
    LrSchedule constant{1e-3};
    CHECK(constant.at(1) == 1e-3);
    CHECK(constant.at(50) == 1e-3);
    LrSchedule step{1e-3, 6};
    CHECK(step.at(5) == 1e-3);
    CHECK(step.at(6) == doctest::Approx(1e-4));
    CHECK(step.at(10) == doctest::Approx(1e-4));
}

TEST_CASE("updates are deterministic") {
    auto run = [] {
        auto m = build_dncnn(4, 6, 1, 3);
        Tensor4<float> y(Shape4{2, 1, 8, 8}), x(y.shape());
        y.values().setLinSpaced(0, 1);
        Optimizer<float> opt(OptimizerConfig{});
        for (int s = 0; s < 5; ++s) {
            auto f = forward(m, y, Mode::Train);
            auto l = residual_mse_loss(f.prediction.residual, y, x);
            auto g = backward(m, *f.cache, l.grad);
            auto p = pair_gradients(m, g);
            opt.step(p);
        }
        return m;
    };
    auto a = run(), b = run();
    const auto pa = a.parameters(), pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
}

TEST_CASE("overfit: 4 fixed patches, 500 Adam steps, loss below 1e-4") {
    auto m = build_dncnn(5, 32, 1, 0);
    const Index p = 16;
    Tensor4<float> clean(Shape4{4, 1, p, p}), noisy(clean.shape());
    std::mt19937_64 rng(1);
    std::normal_distribution<float> noise(0, 25 / 255.0f);
    for (Index b = 0; b < 4; ++b) {
        const auto img = synth::scene(p, p, b);
        for (Index i = 0; i < p * p; ++i) {
            clean.values()[b * p * p + i] = img.pixels[i] / 255.0f;
            noisy.values()[b * p * p + i] = clean.values()[b * p * p + i] + noise(rng);
        }
    }
    Optimizer<float> opt(OptimizerConfig{});
    double first = 0, last = 0;
    for (int s = 0; s <= 500; ++s) {
        auto f = forward(m, noisy, Mode::Train);
        auto l = residual_mse_loss(f.prediction.residual, noisy, clean);
        if (s == 0) first = l.report.value;
        last = l.report.value;
        if (s == 500) break;
        auto g = backward(m, *f.cache, l.grad);
        auto pairs = pair_gradients(m, g);
        opt.step(pairs);
    }
    MESSAGE("loss " << first << " -> " << last);
    CHECK(last < 1e-4);
}

TEST_CASE("grad_check: passes, is deterministic, and catches a sign flip") {
    const auto m = build_dncnn<double>(4, 4, 1, 0);
    const auto probe = make_probe(2, 1, 8, 8, 0);
    const auto a = grad_check(m, probe);
    const auto b = grad_check(m, probe);
    CHECK(a.passed);
    CHECK(a.text() == b.text());
    CHECK(a.tolerance == 1e-3);
    for (const auto& t : a.tensors) {
        CHECK(t.max_rel_error >= 0);
        CHECK(t.checked + t.kink_crossings == std::min<Index>(t.size, 200));
    }

    const BackwardFn flipped = [](const DnCNN<double>& model, const ForwardCache<double>& cache,
                                  const Tensor4<double>& g) {
        auto grads = backward(model, cache, g);
        grads[2] = -grads[2];  // second layer weights
        return grads;
    };
    const auto bad = grad_check(m, probe, {}, flipped);
    CHECK(!bad.passed);
    CHECK(bad.max_rel_error > 1.0);

    GradCheckOptions strict;
    strict.tolerance = 1e-12;
    CHECK(!grad_check(m, probe, strict).passed);
}

TEST_CASE("grad_check: samples at least 200 coordinates of larger tensors") {
    const auto m = build_dncnn<double>(3, 8, 1, 1);
    const auto r = grad_check(m, make_probe(2, 1, 6, 6, 2));
    REQUIRE(r.tensors.size() == 8);
    CHECK(r.tensors[2].size == 576);
    CHECK(r.tensors[2].checked + r.tensors[2].kink_crossings == 200);
    CHECK(r.passed);
}
