#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "dncnn/activation.hpp"
#include "dncnn/batchnorm.hpp"
#include "dncnn/conv.hpp"
#include "dncnn/image.hpp"
#include "dncnn/tensor.hpp"

namespace dncnn {

template <class Scalar>
struct Layer {
    ConvParams<Scalar> conv;
    std::optional<BatchNormParams<Scalar>> bn;
    bool relu = true;

    template <class Other>
    Layer<Other> cast() const {
        std::optional<BatchNormParams<Other>> b;
        if (bn) b = bn->template cast<Other>();
        return {conv.template cast<Other>(), std::move(b), relu};
    }
};

/// Residual denoiser: Conv+ReLU, (depth-2) x Conv+BN+ReLU, Conv. The stack
/// predicts the noise; the clean estimate is input minus prediction.
template <class Scalar>
class DnCNN {
public:
    DnCNN(Index depth, Index width, Index in_channels, std::uint64_t seed, std::vector<Layer<Scalar>> layers)
        : depth_(depth), width_(width), in_channels_(in_channels), seed_(seed), layers_(std::move(layers)) {
        validate();
    }

    Index depth() const { return depth_; }
    Index width() const { return width_; }
    Index in_channels() const { return in_channels_; }
    std::uint64_t seed() const { return seed_; }

    std::vector<Layer<Scalar>>& layers() { return layers_; }
    const std::vector<Layer<Scalar>>& layers() const { return layers_; }

    /// Side length of the input window that influences one output pixel.
    Index receptive_field() const { return 2 * depth_ + 1; }

    /// Trainable tensors in stack order: per layer weights, bias, then gamma
    /// and beta where the layer has batch normalization.
    std::vector<Eigen::Map<VectorX<Scalar>>> parameters() {
        std::vector<Eigen::Map<VectorX<Scalar>>> out;
        for (auto& l : layers_) {
            out.emplace_back(l.conv.weights.data(), l.conv.weights.size());
            out.emplace_back(l.conv.bias.data(), l.conv.bias.size());
            if (l.bn) {
                out.emplace_back(l.bn->gamma.data(), l.bn->gamma.size());
                out.emplace_back(l.bn->beta.data(), l.bn->beta.size());
            }
        }
        return out;
    }

    Index trainable_parameter_count() const {
        Index total = 0;
        for (const auto& l : layers_) total += l.conv.weights.size() + l.conv.bias.size() + (l.bn ? 2 * l.bn->channels() : 0);
        return total;
    }

    /// Trainable parameters plus batch-norm running statistics.
    Index stored_parameter_count() const {
        Index total = trainable_parameter_count();
        for (const auto& l : layers_) total += l.bn ? 2 * l.bn->channels() : 0;
        return total;
    }

    template <class Other>
    DnCNN<Other> cast() const {
        std::vector<Layer<Other>> ls;
        ls.reserve(layers_.size());
        for (const auto& l : layers_) ls.push_back(l.template cast<Other>());
        return DnCNN<Other>(depth_, width_, in_channels_, seed_, std::move(ls));
    }

private:
    void validate() const {
        if (depth_ < 3) throw std::invalid_argument("DnCNN depth must be >= 3, got " + std::to_string(depth_));
        if (width_ < 1 || in_channels_ < 1) throw std::invalid_argument("DnCNN width and channels must be >= 1");
        if (static_cast<Index>(layers_.size()) != depth_)
            throw ShapeError("DnCNN of depth " + std::to_string(depth_) + " given " + std::to_string(layers_.size()) +
                             " layers");
        for (Index i = 0; i < depth_; ++i) {
            const auto& l = layers_[static_cast<std::size_t>(i)];
            const bool first = i == 0, last = i == depth_ - 1;
            l.conv.validate();
            const Index c_in = first ? in_channels_ : width_;
            const Index c_out = last ? in_channels_ : width_;
            if (l.conv.c_in() != c_in || l.conv.c_out() != c_out)
                throw ShapeError("layer " + std::to_string(i + 1) + " has filters " + to_string(l.conv.weights.shape()) +
                                 ", expected (" + std::to_string(c_out) + ", " + std::to_string(c_in) + ", 3, 3)");
            if (l.bn.has_value() == (first || last))
                throw ShapeError("layer " + std::to_string(i + 1) + (first || last ? " must not" : " must") +
                                 " carry batch normalization");
            if (l.bn) {
                l.bn->validate();
                if (l.bn->channels() != width_) throw ShapeError("batch-norm width mismatch in layer " + std::to_string(i + 1));
            }
            if (l.relu == last) throw ShapeError("only the final layer omits ReLU");
        }
    }

    Index depth_;
    Index width_;
    Index in_channels_;
    std::uint64_t seed_;
    std::vector<Layer<Scalar>> layers_;
};

/// Conv weights ~ N(0, 2 / fan_in) from a seeded generator, zero bias,
/// gamma 1, beta 0, running statistics 0 / 1.
template <class Scalar = float>
DnCNN<Scalar> build_dncnn(Index depth = 20, Index width = 64, Index in_channels = 1, std::uint64_t seed = 0) {
    if (depth < 3) throw std::invalid_argument("DnCNN depth must be >= 3, got " + std::to_string(depth));
    if (width < 1 || in_channels < 1) throw std::invalid_argument("DnCNN width and channels must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<Layer<Scalar>> layers;
    for (Index i = 0; i < depth; ++i) {
        const bool first = i == 0, last = i == depth - 1;
        const Index c_in = first ? in_channels : width;
        const Index c_out = last ? in_channels : width;
        Layer<Scalar> l{ConvParams<Scalar>::zeros(c_out, c_in), std::nullopt, !last};
        std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(c_in * 9)));
        for (Index j = 0; j < l.conv.weights.size(); ++j) l.conv.weights.values()[j] = static_cast<Scalar>(init(rng));
        if (!first && !last) l.bn = BatchNormParams<Scalar>::identity(width);
        layers.push_back(std::move(l));
    }
    return DnCNN<Scalar>(depth, width, in_channels, seed, std::move(layers));
}

/// residual = R(y); denoised = y - residual.
template <class Scalar>
struct ResidualPrediction {
    Tensor4<Scalar> residual;
    Tensor4<Scalar> denoised;
};

template <class Scalar>
struct ForwardCache {
    std::vector<Tensor4<Scalar>> inputs;  // input of every layer, in stack order
    std::vector<std::optional<BatchNormCache<Scalar>>> bn;
};

template <class Scalar>
struct ForwardResult {
    ResidualPrediction<Scalar> prediction;
    std::optional<ForwardCache<Scalar>> cache;  // Train mode only
};

template <class Scalar>
using Gradients = std::vector<VectorX<Scalar>>;

namespace detail {

template <class Scalar>
void require_model_input(const DnCNN<Scalar>& model, const Tensor4<Scalar>& y) {
    if (y.c() != model.in_channels())
        throw ShapeError("model expects " + std::to_string(model.in_channels()) + " input channels, got " +
                         std::to_string(y.c()));
}

template <class Scalar>
ResidualPrediction<Scalar> make_prediction(const Tensor4<Scalar>& y, Tensor4<Scalar> residual) {
    Tensor4<Scalar> denoised(y.shape(), y.values() - residual.values());
    return {std::move(residual), std::move(denoised)};
}

} // namespace detail

/// Eval-mode forward on an immutable model; safe to call concurrently.
template <class Scalar>
ResidualPrediction<Scalar> infer(const DnCNN<Scalar>& model, const Tensor4<Scalar>& y) {
    detail::require_model_input(model, y);
    Tensor4<Scalar> x = y;
    for (const auto& l : model.layers()) {
        x = conv2d_forward(x, l.conv);
        if (l.bn) x = batchnorm_inference(std::move(x), *l.bn);
        if (l.relu) x = relu_forward(std::move(x));
    }
    return detail::make_prediction(y, std::move(x));
}

/// Train mode uses batch statistics (updating the running ones) and returns
/// the activations needed by backward().
template <class Scalar>
ForwardResult<Scalar> forward(DnCNN<Scalar>& model, const Tensor4<Scalar>& y, Mode mode) {
    if (mode == Mode::Eval) return {infer(model, y), std::nullopt};
    detail::require_model_input(model, y);

    ForwardCache<Scalar> cache;
    cache.inputs.reserve(model.layers().size());
    Tensor4<Scalar> x = y;
    for (auto& l : model.layers()) {
        Tensor4<Scalar> z = conv2d_forward(x, l.conv);
        cache.inputs.push_back(std::move(x));
        if (l.bn) {
            auto r = batchnorm_forward(z, *l.bn, Mode::Train);
            z = std::move(r.output);
            cache.bn.emplace_back(std::move(r.cache));
        } else {
            cache.bn.emplace_back(std::nullopt);
        }
        if (l.relu) z = relu_forward(std::move(z));
        x = std::move(z);
    }
    return {detail::make_prediction(y, std::move(x)), std::move(cache)};
}

/// Gradients of the loss with respect to every trainable tensor, in the order
/// of DnCNN::parameters(), given the gradient with respect to the residual.
template <class Scalar>
Gradients<Scalar> backward(const DnCNN<Scalar>& model, const ForwardCache<Scalar>& cache,
                           const Tensor4<Scalar>& grad_residual) {
    const auto& layers = model.layers();
    if (cache.inputs.size() != layers.size() || cache.bn.size() != layers.size())
        throw StateError("backward: cache does not belong to this model (" + std::to_string(cache.inputs.size()) +
                         " cached layers, model has " + std::to_string(layers.size()) + ")");
    const Shape4 out_shape{cache.inputs.front().n(), model.in_channels(), cache.inputs.front().h(),
                           cache.inputs.front().w()};
    if (grad_residual.shape() != out_shape)
        throw ShapeError("backward: grad_residual shape " + to_string(grad_residual.shape()) + ", expected " +
                         to_string(out_shape));

    std::vector<std::vector<VectorX<Scalar>>> per_layer(layers.size());
    Tensor4<Scalar> g = grad_residual;
    for (std::size_t i = layers.size(); i-- > 0;) {
        const auto& l = layers[i];
        // ReLU output is the next layer's input; it is positive exactly where
        // the ReLU input is.
        if (l.relu) g = relu_backward(cache.inputs[i + 1], std::move(g));
        VectorX<Scalar> grad_gamma, grad_beta;
        if (l.bn) {
            if (!cache.bn[i]) throw StateError("backward: cache is missing batch-norm state");
            auto gb = batchnorm_backward(*cache.bn[i], *l.bn, g);
            g = std::move(gb.input);
            grad_gamma = std::move(gb.gamma);
            grad_beta = std::move(gb.beta);
        }
        auto gc = conv2d_backward(cache.inputs[i], l.conv, g, i > 0);
        g = std::move(gc.input);
        auto& out = per_layer[i];
        out.push_back(std::move(gc.weights.values()));
        out.push_back(std::move(gc.bias));
        if (l.bn) {
            out.push_back(std::move(grad_gamma));
            out.push_back(std::move(grad_beta));
        }
    }
    Gradients<Scalar> grads;
    for (auto& layer_grads : per_layer)
        for (auto& v : layer_grads) grads.push_back(std::move(v));
    return grads;
}

/// Binds each trainable tensor of `model` to its gradient.
template <class Scalar>
std::vector<GradPair<Scalar>> pair_gradients(DnCNN<Scalar>& model, const Gradients<Scalar>& grads) {
    auto params = model.parameters();
    if (params.size() != grads.size())
        throw ShapeError("model has " + std::to_string(params.size()) + " parameter tensors, got " +
                         std::to_string(grads.size()) + " gradients");
    std::vector<GradPair<Scalar>> out;
    out.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
        out.emplace_back(params[i], Eigen::Map<const VectorX<Scalar>>(grads[i].data(), grads[i].size()));
    return out;
}

struct LossReport {
    double value = 0;
    Index batch_size = 0;
};

template <class Scalar>
struct LossResult {
    LossReport report;
    Tensor4<Scalar> grad;  // d loss / d predicted
};

/// loss = 1/(2N) * sum_i ||R(y_i) - (y_i - x_i)||_F^2 over a batch of N.
template <class Scalar>
LossResult<Scalar> residual_mse_loss(const Tensor4<Scalar>& predicted, const Tensor4<Scalar>& y,
                                     const Tensor4<Scalar>& x) {
    require_same_shape(predicted, y, "residual_mse_loss");
    require_same_shape(predicted, x, "residual_mse_loss");
    const Index n = predicted.n();
    VectorX<Scalar> diff = predicted.values() - (y.values() - x.values());
    const double value = 0.5 * diff.template cast<double>().squaredNorm() / static_cast<double>(n);
    diff /= static_cast<Scalar>(n);
    return {{value, n}, Tensor4<Scalar>(predicted.shape(), std::move(diff))};
}

/// 8-bit image -> [0, 1] -> Eval forward -> clamp -> round half up.
ImageGray8 denoise_image(const DnCNN<float>& model, const ImageGray8& image);

Tensor4<float> image_to_tensor(const ImageGray8& image);
ImageGray8 tensor_to_image(const Tensor4<float>& t);

} // namespace dncnn
