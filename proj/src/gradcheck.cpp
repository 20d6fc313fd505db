#include "dncnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "dncnn/binary_io.hpp"

namespace dncnn {

namespace {

double rel_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

struct LossSample {
    double value;
    std::vector<bool> relu_pattern;
};

LossSample train_loss(DnCNN<double> model, const Probe& probe) {
    auto fwd = forward(model, probe.noisy, Mode::Train);
    LossSample s{residual_mse_loss(fwd.prediction.residual, probe.noisy, probe.clean).report.value, {}};
    for (std::size_t i = 1; i < fwd.cache->inputs.size(); ++i) {
        const auto& v = fwd.cache->inputs[i].values();
        for (Index j = 0; j < v.size(); ++j) s.relu_pattern.push_back(v[j] > 0);
    }
    return s;
}

std::vector<std::string> parameter_names(const DnCNN<double>& model) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        const std::string p = "layer" + std::to_string(i + 1) + ".";
        names.push_back(p + "weight");
        names.push_back(p + "bias");
        if (model.layers()[i].bn) {
            names.push_back(p + "gamma");
            names.push_back(p + "beta");
        }
    }
    return names;
}

std::vector<Index> sample_coordinates(Index size, Index samples, std::uint64_t seed) {
    std::vector<Index> all(static_cast<std::size_t>(size));
    std::iota(all.begin(), all.end(), Index{0});
    if (size <= samples) return all;
    std::vector<Index> picked;
    std::mt19937_64 rng(seed);
    std::sample(all.begin(), all.end(), std::back_inserter(picked), samples, rng);
    return picked;
}

Tensor4<double> random_tensor(Shape4 shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor4<double> t(shape);
    for (Index i = 0; i < t.size(); ++i) t.values()[i] = u(rng);
    return t;
}

double weighted_sum(const Tensor4<double>& r, const Tensor4<double>& out) { return r.values().dot(out.values()); }

// Central difference of f at coordinate `i` of `v`, restoring v afterwards.
template <class F>
double central_difference(double& coord, double step, F&& f) {
    const double saved = coord;
    coord = saved + step;
    const double plus = f();
    coord = saved - step;
    const double minus = f();
    coord = saved;
    return (plus - minus) / (2 * step);
}

void accumulate(KernelCheck& k, double analytic, double numeric) {
    k.max_rel_error = std::max(k.max_rel_error, rel_error(analytic, numeric, 1e-8));
    ++k.checked;
}

} // namespace

std::string GradCheckReport::text() const {
    std::ostringstream out;
    char line[160];
    for (const auto& t : tensors) {
        std::snprintf(line, sizeof line, "%-16s size %6ld  checked %4ld  kinks %3ld  max rel err %.3e\n",
                      t.name.c_str(), static_cast<long>(t.size), static_cast<long>(t.checked),
                      static_cast<long>(t.kink_crossings), t.max_rel_error);
        out << line;
    }
    std::snprintf(line, sizeof line, "max rel err %.3e, tolerance %.1e: %s\n", max_rel_error, tolerance,
                  passed ? "PASS" : "FAIL");
    out << line;
    return out.str();
}

Probe make_probe(Index batch, Index channels, Index h, Index w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Probe p{Tensor4<double>(Shape4{batch, channels, h, w}), random_tensor(Shape4{batch, channels, h, w}, rng, 0.0, 1.0)};
    std::normal_distribution<double> noise(0.0, 0.1);
    for (Index i = 0; i < p.clean.size(); ++i) p.noisy.values()[i] = p.clean.values()[i] + noise(rng);
    return p;
}

GradCheckReport grad_check(const DnCNN<double>& model, const Probe& probe, const GradCheckOptions& options,
                           const BackwardFn& bwd) {
    DnCNN<double> work = model;
    auto fwd = forward(work, probe.noisy, Mode::Train);
    auto loss = residual_mse_loss(fwd.prediction.residual, probe.noisy, probe.clean);
    const Gradients<double> analytic =
        bwd ? bwd(model, *fwd.cache, loss.grad) : backward(model, *fwd.cache, loss.grad);

    const auto base_pattern = train_loss(model, probe).relu_pattern;
    const auto names = parameter_names(model);
    GradCheckReport report;
    report.tolerance = options.tolerance;

    DnCNN<double> probe_model = model;
    auto params = probe_model.parameters();
    if (analytic.size() != params.size())
        throw ShapeError("grad_check: backward produced " + std::to_string(analytic.size()) + " tensors, model has " +
                         std::to_string(params.size()));

    for (std::size_t t = 0; t < params.size(); ++t) {
        TensorCheck tc{names[t], params[t].size(), 0, 0, 0.0};
        if (analytic[t].size() != params[t].size())
            throw ShapeError("grad_check: gradient for " + names[t] + " has the wrong length");
        for (Index i : sample_coordinates(params[t].size(), options.samples_per_tensor, derive_seed(options.seed, t))) {
            bool crossed = false;
            const double numeric = central_difference(params[t][i], options.step, [&] {
                auto s = train_loss(probe_model, probe);
                crossed = crossed || s.relu_pattern != base_pattern;
                return s.value;
            });
            if (crossed) {
                ++tc.kink_crossings;
                continue;
            }
            tc.max_rel_error = std::max(tc.max_rel_error, rel_error(analytic[t][i], numeric, options.abs_floor));
            ++tc.checked;
        }
        report.max_rel_error = std::max(report.max_rel_error, tc.max_rel_error);
        report.tensors.push_back(std::move(tc));
    }
    report.passed = report.max_rel_error < options.tolerance;
    return report;
}

KernelCheck check_conv_kernel(std::uint64_t seed, double tolerance) {
    std::mt19937_64 rng(seed);
    Tensor4<double> input = random_tensor(Shape4{2, 3, 6, 5}, rng);
    ConvParams<double> p{random_tensor(Shape4{4, 3, 3, 3}, rng), VectorX<double>::Zero(4)};
    for (Index i = 0; i < 4; ++i) p.bias[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
    const Tensor4<double> r = random_tensor(Shape4{2, 4, 6, 5}, rng);

    const auto g = conv2d_backward(input, p, r);
    auto f = [&] { return weighted_sum(r, conv2d_forward(input, p)); };
    const double h = 1e-3;
    KernelCheck k{"conv2d", 0, 0, false};
    for (Index i = 0; i < input.size(); ++i)
        accumulate(k, g.input.values()[i], central_difference(input.values()[i], h, f));
    for (Index i = 0; i < p.weights.size(); ++i)
        accumulate(k, g.weights.values()[i], central_difference(p.weights.values()[i], h, f));
    for (Index i = 0; i < p.bias.size(); ++i) accumulate(k, g.bias[i], central_difference(p.bias[i], h, f));
    k.passed = k.max_rel_error < tolerance;
    return k;
}

KernelCheck check_relu_kernel(std::uint64_t seed, double tolerance) {
    std::mt19937_64 rng(seed);
    Tensor4<double> input = random_tensor(Shape4{2, 3, 4, 4}, rng);
    // Stay away from the kink by more than the step.
    for (Index i = 0; i < input.size(); ++i) {
        double& v = input.values()[i];
        if (std::abs(v) <= 1e-2) v = v < 0 ? v - 2e-2 : v + 2e-2;
    }
    const Tensor4<double> r = random_tensor(input.shape(), rng);
    const auto g = relu_backward(input, r);
    auto f = [&] { return weighted_sum(r, relu_forward(input)); };
    KernelCheck k{"relu", 0, 0, false};
    for (Index i = 0; i < input.size(); ++i)
        accumulate(k, g.values()[i], central_difference(input.values()[i], 1e-3, f));
    k.passed = k.max_rel_error < tolerance;
    return k;
}

KernelCheck check_batchnorm_kernel(std::uint64_t seed, double tolerance) {
    std::mt19937_64 rng(seed);
    Tensor4<double> input = random_tensor(Shape4{3, 2, 4, 3}, rng);
    auto p = BatchNormParams<double>::identity(2);
    for (Index c = 0; c < 2; ++c) {
        p.gamma[c] = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
        p.beta[c] = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    }
    const Tensor4<double> r = random_tensor(input.shape(), rng);

    auto params = p;
    const auto fwd = batchnorm_forward(input, params, Mode::Train);
    const auto g = batchnorm_backward(fwd.cache, p, r);
    auto f = [&] {
        auto scratch = p;
        return weighted_sum(r, batchnorm_forward(input, scratch, Mode::Train).output);
    };
    const double h = 1e-3;
    KernelCheck k{"batchnorm", 0, 0, false};
    for (Index i = 0; i < input.size(); ++i)
        accumulate(k, g.input.values()[i], central_difference(input.values()[i], h, f));
    for (Index c = 0; c < 2; ++c) {
        accumulate(k, g.gamma[c], central_difference(p.gamma[c], h, f));
        accumulate(k, g.beta[c], central_difference(p.beta[c], h, f));
    }
    k.passed = k.max_rel_error < tolerance;
    return k;
}

} // namespace dncnn
