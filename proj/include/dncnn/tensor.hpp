#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>

#include "dncnn/error.hpp"

namespace dncnn {

using Index = Eigen::Index;

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Batch, channel, height, width.
struct Shape4 {
    Index n = 1;
    Index c = 1;
    Index h = 1;
    Index w = 1;

    Index size() const { return n * c * h * w; }
    Index plane() const { return h * w; }

    friend bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::string to_string(const Shape4& s) {
    return "(" + std::to_string(s.n) + ", " + std::to_string(s.c) + ", " + std::to_string(s.h) +
           ", " + std::to_string(s.w) + ")";
}

enum class Mode { Train, Eval };

/// Dense NCHW tensor, width fastest. All network math runs on this type.
template <class Scalar>
class Tensor4 {
public:
    using Vector = VectorX<Scalar>;
    using ImageMap = Eigen::Map<MatrixRM<Scalar>>;
    using ConstImageMap = Eigen::Map<const MatrixRM<Scalar>>;

    Tensor4() : Tensor4(Shape4{}) {}

    explicit Tensor4(Shape4 shape) : shape_(checked(shape)), values_(Vector::Zero(shape.size())) {}

    Tensor4(Shape4 shape, Vector values) : shape_(checked(shape)), values_(std::move(values)) {
        if (values_.size() != shape_.size())
            throw ShapeError("tensor of shape " + to_string(shape_) + " given " +
                             std::to_string(values_.size()) + " values");
    }

    static Tensor4 constant(Shape4 shape, Scalar value) {
        return Tensor4(shape, Vector::Constant(shape.size(), value));
    }

    const Shape4& shape() const { return shape_; }
    Index n() const { return shape_.n; }
    Index c() const { return shape_.c; }
    Index h() const { return shape_.h; }
    Index w() const { return shape_.w; }
    Index size() const { return values_.size(); }

    Vector& values() { return values_; }
    const Vector& values() const { return values_; }
    Scalar* data() { return values_.data(); }
    const Scalar* data() const { return values_.data(); }

    Scalar& operator()(Index b, Index ch, Index i, Index j) { return values_[offset(b, ch, i, j)]; }
    Scalar operator()(Index b, Index ch, Index i, Index j) const { return values_[offset(b, ch, i, j)]; }

    /// Sample `b` viewed as a channels x (h*w) matrix.
    ImageMap image(Index b) { return ImageMap(data() + b * shape_.c * shape_.plane(), shape_.c, shape_.plane()); }
    ConstImageMap image(Index b) const {
        return ConstImageMap(data() + b * shape_.c * shape_.plane(), shape_.c, shape_.plane());
    }

    /// One channel plane viewed as an h x w matrix.
    ImageMap plane(Index b, Index ch) { return ImageMap(data() + (b * shape_.c + ch) * shape_.plane(), shape_.h, shape_.w); }
    ConstImageMap plane(Index b, Index ch) const {
        return ConstImageMap(data() + (b * shape_.c + ch) * shape_.plane(), shape_.h, shape_.w);
    }

    template <class Other>
    Tensor4<Other> cast() const {
        return Tensor4<Other>(shape_, values_.template cast<Other>());
    }

    bool all_finite() const { return values_.allFinite(); }

private:
    static Shape4 checked(Shape4 s) {
        if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1)
            throw ShapeError("tensor dimensions must be >= 1, got " + to_string(s));
        return s;
    }

    Index offset(Index b, Index ch, Index i, Index j) const {
        return ((b * shape_.c + ch) * shape_.h + i) * shape_.w + j;
    }

    Shape4 shape_;
    Vector values_;
};

template <class Scalar>
void require_same_shape(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b, const char* what) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(what) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

/// 3x3 convolution filter bank. weights: (c_out, c_in, 3, 3).
template <class Scalar>
struct ConvParams {
    Tensor4<Scalar> weights;
    VectorX<Scalar> bias;

    static ConvParams zeros(Index c_out, Index c_in) {
        return {Tensor4<Scalar>(Shape4{c_out, c_in, 3, 3}), VectorX<Scalar>::Zero(c_out)};
    }

    Index c_out() const { return weights.n(); }
    Index c_in() const { return weights.c(); }

    void validate() const {
        if (weights.h() != 3 || weights.w() != 3)
            throw ShapeError("convolution kernels must be 3x3, got " + to_string(weights.shape()));
        if (bias.size() != c_out())
            throw ShapeError("bias length " + std::to_string(bias.size()) + " does not match " +
                             std::to_string(c_out()) + " output channels");
    }

    template <class Other>
    ConvParams<Other> cast() const {
        return {weights.template cast<Other>(), bias.template cast<Other>()};
    }
};

template <class Scalar>
struct BatchNormParams {
    VectorX<Scalar> gamma;
    VectorX<Scalar> beta;
    VectorX<Scalar> running_mean;
    VectorX<Scalar> running_var;
    Scalar epsilon = Scalar(1e-5);
    Scalar momentum = Scalar(0.9);

    /// gamma = 1, beta = 0, running statistics 0 / 1.
    static BatchNormParams identity(Index channels) {
        return {VectorX<Scalar>::Ones(channels), VectorX<Scalar>::Zero(channels),
                VectorX<Scalar>::Zero(channels), VectorX<Scalar>::Ones(channels)};
    }

    Index channels() const { return gamma.size(); }

    void validate() const {
        const Index c = channels();
        if (beta.size() != c || running_mean.size() != c || running_var.size() != c)
            throw ShapeError("batch-norm parameter vectors differ in length");
        if (!(epsilon > 0))
            throw std::invalid_argument("batch-norm epsilon must be positive");
        if (!(momentum > 0 && momentum < 1))
            throw std::invalid_argument("batch-norm momentum must lie in (0, 1)");
        if ((running_var.array() < 0).any())
            throw std::invalid_argument("batch-norm running variance must be non-negative");
    }

    template <class Other>
    BatchNormParams<Other> cast() const {
        return {gamma.template cast<Other>(),        beta.template cast<Other>(),
                running_mean.template cast<Other>(), running_var.template cast<Other>(),
                static_cast<Other>(epsilon),         static_cast<Other>(momentum)};
    }
};

/// A trainable parameter tensor (flattened) and the gradient aligned with it.
template <class Scalar>
struct GradPair {
    Eigen::Map<VectorX<Scalar>> value;
    Eigen::Map<const VectorX<Scalar>> grad;

    GradPair(Eigen::Map<VectorX<Scalar>> v, Eigen::Map<const VectorX<Scalar>> g) : value(v), grad(g) {
        if (value.size() != grad.size())
            throw ShapeError("parameter of length " + std::to_string(value.size()) + " paired with gradient of length " +
                             std::to_string(grad.size()));
    }
};

} // namespace dncnn
