#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dncnn/gradcheck.hpp"
#include "dncnn/model.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace dncnn;

namespace {

Tensor4<float> noisy_batch(Index n, Index h, Index w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0, 1);
    Tensor4<float> t(Shape4{n, 1, h, w});
    for (Index i = 0; i < t.size(); ++i) t.values()[i] = u(rng);
    return t;
}

template <class S>
void zero_network(DnCNN<S>& m) {
    for (auto& l : m.layers()) {
        l.conv.weights.values().setZero();
        l.conv.bias.setZero();
    }
}

} // namespace

TEST_CASE("build: structure") {
    const auto m = build_dncnn(20, 64, 1, 0);
    REQUIRE(m.layers().size() == 20);
    CHECK(!m.layers().front().bn);
    CHECK(m.layers().front().relu);
    CHECK(!m.layers().back().bn);
    CHECK(!m.layers().back().relu);
    int bn = 0;
    for (const auto& l : m.layers()) bn += l.bn ? 1 : 0;
    CHECK(bn == 18);
    CHECK(m.layers().front().conv.c_in() == 1);
    CHECK(m.layers().back().conv.c_out() == 1);
    CHECK(m.receptive_field() == 41);
}

TEST_CASE("build: parameter counts") {
    const auto m = build_dncnn(20, 64, 1, 0);
    const Index trainable = (1 * 64 * 9 + 64) + 18 * (64 * 64 * 9 + 64 + 2 * 64) + (64 * 1 * 9 + 1);
    CHECK(trainable == 668225);
    CHECK(m.trainable_parameter_count() == 668225);
    CHECK(m.stored_parameter_count() == 668225 + 18 * 2 * 64);
}

TEST_CASE("build: determinism and seed dependence") {
    auto a = build_dncnn(20, 64, 1, 7);
    auto b = build_dncnn(20, 64, 1, 7);
    auto c = build_dncnn(20, 64, 1, 8);
    const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    bool same = true, differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        same = same && pa[i] == pb[i];
        differs = differs || pa[i] != pc[i];
    }
    CHECK(same);
    CHECK(differs);
}

TEST_CASE("build: He-scaled initialization") {
    const auto m = build_dncnn(5, 64, 1, 3);
    const auto& w = m.layers()[2].conv.weights.values();
    const double mean = w.cast<double>().mean();
    const double sd = std::sqrt((w.cast<double>().array() - mean).square().mean());
    CHECK(std::abs(mean) < 0.01);
    CHECK(sd == doctest::Approx(std::sqrt(2.0 / (64 * 9))).epsilon(0.02));
    CHECK(m.layers()[2].conv.bias.isZero(0));
    CHECK(m.layers()[2].bn->gamma.isOnes(0));
    CHECK(m.layers()[2].bn->running_var.isOnes(0));
}

TEST_CASE("build: invalid depth") {
    CHECK_THROWS_AS(build_dncnn(2, 64, 1, 0), std::invalid_argument);
    CHECK_NOTHROW(build_dncnn(3, 4, 1, 0));
}

TEST_CASE("forward: zero network is the identity") {
    auto m = build_dncnn(5, 8, 1, 1);
    zero_network(m);
    const auto y = noisy_batch(2, 9, 7, 2);
    const auto r = forward(m, y, Mode::Eval);
    CHECK(r.prediction.residual.values().isZero(0));
    CHECK(r.prediction.denoised.values() == y.values());
    CHECK(!r.cache);

    const auto img = synth::scene(40, 30, 3);
    CHECK(denoise_image(m, img) == img);
}

TEST_CASE("forward: shapes, denoised = y - residual, and train cache") {
    auto m = build_dncnn(6, 8, 1, 4);
    const auto y = noisy_batch(3, 11, 13, 5);
    for (Mode mode : {Mode::Eval, Mode::Train}) {
        const auto r = forward(m, y, mode);
        CHECK(r.prediction.residual.shape() == y.shape());
        CHECK(r.prediction.denoised.shape() == y.shape());
        const Tensor4<float> expect(y.shape(), y.values() - r.prediction.residual.values());
        CHECK(r.prediction.denoised.values() == expect.values());
        // Adding the residual back recovers y to within one rounding of the
        // subtraction.
        const auto back = r.prediction.denoised.values() + r.prediction.residual.values();
        const float eps = std::numeric_limits<float>::epsilon();
        const auto bound = 2 * eps * (y.values().cwiseAbs() + r.prediction.residual.values().cwiseAbs());
        CHECK(((back - y.values()).cwiseAbs().array() <= bound.array()).all());
        CHECK(r.cache.has_value() == (mode == Mode::Train));
    }
}

TEST_CASE("forward: channel mismatch") {
    auto m = build_dncnn(4, 4, 1, 0);
    const Tensor4<float> y(Shape4{1, 2, 8, 8});
    CHECK_THROWS_AS(forward(m, y, Mode::Eval), ShapeError);
    CHECK_THROWS_AS(infer(m, y), ShapeError);
}

TEST_CASE("forward: eval is bit-reproducible and leaves running stats alone") {
    auto m = build_dncnn(6, 8, 1, 9);
    const auto y = noisy_batch(1, 16, 16, 10);
    const auto before = m.layers()[1].bn->running_mean;
    const auto a = forward(m, y, Mode::Eval).prediction.denoised.values();
    const auto b = infer(m, y).denoised.values();
    CHECK(a == b);
    CHECK(m.layers()[1].bn->running_mean == before);
    forward(m, y, Mode::Train);
    CHECK(m.layers()[1].bn->running_mean != before);
}

TEST_CASE("loss: definition") {
    const auto y = noisy_batch(2, 4, 4, 11);
    const auto x = noisy_batch(2, 4, 4, 12);
    const Tensor4<float> truth(y.shape(), y.values() - x.values());
    const auto zero = residual_mse_loss(truth, y, x);
    CHECK(zero.report.value == 0);
    CHECK(zero.report.batch_size == 2);
    CHECK(zero.grad.values().isZero(0));

    Tensor4<float> y1(Shape4{1, 1, 3, 3}), x1(Shape4{1, 1, 3, 3}), p1(Shape4{1, 1, 3, 3});
    p1(0, 0, 1, 2) = 2;
    const auto one = residual_mse_loss(p1, y1, x1);
    CHECK(one.report.value == 2.0);
    CHECK(one.grad(0, 0, 1, 2) == 2.0f);

    CHECK_THROWS_AS(residual_mse_loss(p1, y, x), ShapeError);
}

TEST_CASE("loss: duplicating the batch leaves it unchanged") {
    const auto y = noisy_batch(1, 5, 5, 13);
    const auto x = noisy_batch(1, 5, 5, 14);
    const auto p = noisy_batch(1, 5, 5, 15);
    auto dup = [](const Tensor4<float>& t) {
        VectorX<float> v(2 * t.size());
        v << t.values(), t.values();
        return Tensor4<float>(Shape4{2, 1, t.h(), t.w()}, v);
    };
    const double single = residual_mse_loss(p, y, x).report.value;
    const double doubled = residual_mse_loss(dup(p), dup(y), dup(x)).report.value;
    CHECK(doubled == doctest::Approx(single).epsilon(1e-12));
    CHECK(single > 0);
}

TEST_CASE("backward: zero residual gradient gives zero parameter gradients") {
    auto m = build_dncnn(5, 6, 1, 16);
    const auto y = noisy_batch(2, 8, 8, 17);
    const auto r = forward(m, y, Mode::Train);
    const auto g = backward(m, *r.cache, Tensor4<float>(y.shape()));
    REQUIRE(g.size() == m.parameters().size());
    for (const auto& v : g) CHECK(v.isZero(0));
}

TEST_CASE("backward: shapes mirror parameters and results are deterministic") {
    auto m = build_dncnn(5, 6, 1, 18);
    const auto y = noisy_batch(2, 8, 8, 19);
    const auto r = forward(m, y, Mode::Train);
    const auto go = noisy_batch(2, 8, 8, 20);
    const auto g1 = backward(m, *r.cache, go);
    const auto g2 = backward(m, *r.cache, go);
    const auto params = m.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        CHECK(g1[i].size() == params[i].size());
        CHECK(g1[i] == g2[i]);
    }
}

TEST_CASE("backward: cache from another model is rejected") {
    auto a = build_dncnn(5, 6, 1, 0);
    auto b = build_dncnn(4, 6, 1, 0);
    const auto y = noisy_batch(2, 8, 8, 21);
    const auto r = forward(b, y, Mode::Train);
    CHECK_THROWS_AS(backward(a, *r.cache, y), StateError);
    CHECK_THROWS_AS(backward(a, ForwardCache<float>{}, y), StateError);
}

TEST_CASE("backward: end-to-end finite differences, depth 4 width 4 8x8") {
    const auto m = build_dncnn<double>(4, 4, 1, 0);
    const auto probe = make_probe(2, 1, 8, 8, 1);
    const auto report = grad_check(m, probe);
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-3);
    for (const auto& t : report.tensors) CHECK(t.checked > 0);
}

TEST_CASE("backward: gradient of the full loss, every coordinate, independent oracle") {
    // Every coordinate, differenced directly through forward() rather than
    // through grad_check.
    auto m = build_dncnn<double>(3, 3, 1, 5);
    const auto probe = make_probe(2, 1, 5, 5, 6);
    auto r = forward(m, probe.noisy, Mode::Train);
    const auto loss = residual_mse_loss(r.prediction.residual, probe.noisy, probe.clean);
    const auto g = backward(m, *r.cache, loss.grad);
    auto params = m.parameters();
    double worst = 0;
    Index checked = 0;
    for (std::size_t t = 0; t < params.size(); ++t)
        for (Index k = 0; k < params[t].size(); ++k) {
            auto eval = [&](double delta) {
                auto copy = m;
                copy.parameters()[t][k] += delta;
                const auto fr = forward(copy, probe.noisy, Mode::Train);
                return residual_mse_loss(fr.prediction.residual, probe.noisy, probe.clean).report.value;
            };
            // A small step keeps most stencils on one side of every ReLU kink;
            // when the h and 2h estimates disagree a kink is inside, skip it.
            const double numeric = (eval(1e-6) - eval(-1e-6)) / 2e-6;
            const double wide = (eval(2e-6) - eval(-2e-6)) / 4e-6;
            if (oracle::rel_error(numeric, wide, 1e-6) > 1e-5) continue;
            const double e = oracle::rel_error(g[t][k], numeric, 1e-6);
            worst = std::max(worst, e);
            ++checked;
        }
    MESSAGE("checked " << checked << " coordinates");
    CHECK(checked > 50);
    CHECK(worst < 1e-3);
}

TEST_CASE("double and float paths agree") {
    const auto mf = build_dncnn<float>(5, 8, 1, 22);
    const auto md = mf.cast<double>();
    const auto y = noisy_batch(1, 12, 12, 23);
    const VectorX<double> rf = infer(mf, y).residual.values().cast<double>();
    const VectorX<double> rd = infer(md, y.cast<double>()).residual.values();
    CHECK((rf - rd).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("denoise_image: size and quantization") {
    auto m = build_dncnn(4, 4, 1, 24);
    const auto img = synth::scene(37, 23, 25);
    const auto out = denoise_image(m, img);
    CHECK(out.width == 37);
    CHECK(out.height == 23);

    Tensor4<float> t(Shape4{1, 1, 1, 5});
    t.values() << -0.5f, 0.0f, 0.5f / 255.0f, 1.0f, 2.0f;
    const auto q = tensor_to_image(t);
    CHECK(q.pixels == std::vector<std::uint8_t>{0, 0, 1, 255, 255});
    CHECK(tensor_to_image(image_to_tensor(img)) == img);
}
