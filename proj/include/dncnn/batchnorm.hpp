#pragma once

#include <cmath>

#include "dncnn/tensor.hpp"

namespace dncnn {

/// What a Train-mode forward keeps for the backward pass.
template <class Scalar>
struct BatchNormCache {
    Mode mode = Mode::Eval;
    Tensor4<Scalar> normalized;  // x_hat, Train mode only
    VectorX<Scalar> inv_std;     // 1 / sqrt(var + eps) per channel
};

template <class Scalar>
struct BatchNormResult {
    Tensor4<Scalar> output;
    BatchNormCache<Scalar> cache;
};

template <class Scalar>
struct BatchNormGradients {
    Tensor4<Scalar> input;
    VectorX<Scalar> gamma;
    VectorX<Scalar> beta;
};

namespace detail {

template <class Scalar>
void require_channels(const Tensor4<Scalar>& t, const BatchNormParams<Scalar>& p, const char* what) {
    p.validate();
    if (t.c() != p.channels())
        throw ShapeError(std::string(what) + ": tensor has " + std::to_string(t.c()) + " channels, parameters have " +
                         std::to_string(p.channels()));
}

} // namespace detail

/// Normalizes with the running statistics. Never touches `p`.
template <class Scalar>
Tensor4<Scalar> batchnorm_inference(Tensor4<Scalar> input, const BatchNormParams<Scalar>& p) {
    detail::require_channels(input, p, "batchnorm_inference");
    for (Index ch = 0; ch < input.c(); ++ch) {
        const Scalar scale = p.gamma[ch] / std::sqrt(p.running_var[ch] + p.epsilon);
        const Scalar shift = p.beta[ch] - scale * p.running_mean[ch];
        for (Index b = 0; b < input.n(); ++b) {
            auto plane = input.plane(b, ch).array();
            plane = plane * scale + shift;
        }
    }
    return input;
}

/// Train mode normalizes each channel over (n, h, w) with the batch mean and
/// biased variance, then updates the running statistics in `p` as
/// running = momentum * running + (1 - momentum) * batch, using the unbiased
/// batch variance. Eval mode defers to batchnorm_inference.
template <class Scalar>
BatchNormResult<Scalar> batchnorm_forward(const Tensor4<Scalar>& input, BatchNormParams<Scalar>& p, Mode mode) {
    if (mode == Mode::Eval) return {batchnorm_inference(input, p), BatchNormCache<Scalar>{}};

    detail::require_channels(input, p, "batchnorm_forward");
    const Index count = input.n() * input.h() * input.w();
    if (count < 2)
        throw ShapeError("batchnorm_forward: Train mode needs at least two values per channel, got " +
                         std::to_string(count));

    BatchNormResult<Scalar> r{Tensor4<Scalar>(input.shape()),
                              {Mode::Train, Tensor4<Scalar>(input.shape()), VectorX<Scalar>(input.c())}};
    for (Index ch = 0; ch < input.c(); ++ch) {
        Scalar sum = 0;
        for (Index b = 0; b < input.n(); ++b) sum += input.plane(b, ch).sum();
        const Scalar mean = sum / Scalar(count);
        Scalar sq = 0;
        for (Index b = 0; b < input.n(); ++b) sq += (input.plane(b, ch).array() - mean).square().sum();
        const Scalar var = sq / Scalar(count);
        const Scalar inv_std = Scalar(1) / std::sqrt(var + p.epsilon);
        r.cache.inv_std[ch] = inv_std;

        for (Index b = 0; b < input.n(); ++b) {
            auto x_hat = r.cache.normalized.plane(b, ch).array();
            x_hat = (input.plane(b, ch).array() - mean) * inv_std;
            r.output.plane(b, ch).array() = x_hat * p.gamma[ch] + p.beta[ch];
        }

        const Scalar unbiased = sq / Scalar(count - 1);
        p.running_mean[ch] = p.momentum * p.running_mean[ch] + (Scalar(1) - p.momentum) * mean;
        p.running_var[ch] = p.momentum * p.running_var[ch] + (Scalar(1) - p.momentum) * unbiased;
    }
    return r;
}

template <class Scalar>
BatchNormGradients<Scalar> batchnorm_backward(const BatchNormCache<Scalar>& cache, const BatchNormParams<Scalar>& p,
                                              const Tensor4<Scalar>& grad_out) {
    if (cache.mode != Mode::Train)
        throw StateError("batchnorm_backward: cache comes from an Eval-mode forward, no training gradient is defined");
    require_same_shape(cache.normalized, grad_out, "batchnorm_backward");
    detail::require_channels(grad_out, p, "batchnorm_backward");

    const Index count = grad_out.n() * grad_out.h() * grad_out.w();
    BatchNormGradients<Scalar> g{Tensor4<Scalar>(grad_out.shape()), VectorX<Scalar>::Zero(p.channels()),
                                 VectorX<Scalar>::Zero(p.channels())};
    for (Index ch = 0; ch < grad_out.c(); ++ch) {
        Scalar sum_g = 0, sum_gx = 0;
        for (Index b = 0; b < grad_out.n(); ++b) {
            const auto go = grad_out.plane(b, ch).array();
            sum_g += go.sum();
            sum_gx += (go * cache.normalized.plane(b, ch).array()).sum();
        }
        g.beta[ch] = sum_g;
        g.gamma[ch] = sum_gx;

        // dx = gamma * inv_std / M * (M * g - sum(g) - x_hat * sum(g * x_hat))
        const Scalar scale = p.gamma[ch] * cache.inv_std[ch] / Scalar(count);
        for (Index b = 0; b < grad_out.n(); ++b) {
            g.input.plane(b, ch).array() =
                scale * (Scalar(count) * grad_out.plane(b, ch).array() - sum_g -
                         cache.normalized.plane(b, ch).array() * sum_gx);
        }
    }
    return g;
}

} // namespace dncnn
