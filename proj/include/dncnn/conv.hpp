#pragma once

#include <algorithm>

#include "dncnn/tensor.hpp"

namespace dncnn {

// 3x3 cross-correlation with one pixel of zero padding on every side, so the
// spatial size is preserved. The inner loop unfolds a band of rows into a
// (c_in*9) x (rows*w) patch matrix and multiplies it with the filter bank.

template <class Scalar>
struct ConvGradients {
    Tensor4<Scalar> input;
    Tensor4<Scalar> weights;
    VectorX<Scalar> bias;
};

namespace detail {

/// Rows per unfolded band; keeps the patch matrix around 1k columns.
inline Index conv_band_rows(Index w) { return std::max<Index>(1, 1024 / w); }

template <class Scalar>
void im2col_band(const Scalar* image, Index channels, Index h, Index w, Index row0, Index rows, MatrixRM<Scalar>& col) {
    for (Index ch = 0; ch < channels; ++ch) {
        const Scalar* src = image + ch * h * w;
        for (Index k = 0; k < 9; ++k) {
            const Index di = k / 3 - 1;
            const Index dj = k % 3 - 1;
            Scalar* dst = col.row(ch * 9 + k).data();
            for (Index i = 0; i < rows; ++i) {
                Scalar* d = dst + i * w;
                const Index si = row0 + i + di;
                if (si < 0 || si >= h) {
                    std::fill(d, d + w, Scalar(0));
                    continue;
                }
                const Scalar* s = src + si * w;
                const Index j0 = dj < 0 ? 1 : 0;
                const Index j1 = dj > 0 ? w - 1 : w;
                if (dj < 0) d[0] = Scalar(0);
                if (dj > 0) d[w - 1] = Scalar(0);
                for (Index j = j0; j < j1; ++j) d[j] = s[j + dj];
            }
        }
    }
}

/// Adjoint of im2col_band: scatters a patch-matrix band back onto the image.
template <class Scalar>
void col2im_band_add(const MatrixRM<Scalar>& col, Index channels, Index h, Index w, Index row0, Index rows, Scalar* image) {
    for (Index ch = 0; ch < channels; ++ch) {
        Scalar* dst = image + ch * h * w;
        for (Index k = 0; k < 9; ++k) {
            const Index di = k / 3 - 1;
            const Index dj = k % 3 - 1;
            const Scalar* src = col.row(ch * 9 + k).data();
            for (Index i = 0; i < rows; ++i) {
                const Index si = row0 + i + di;
                if (si < 0 || si >= h) continue;
                const Scalar* s = src + i * w;
                Scalar* d = dst + si * w;
                const Index j0 = dj < 0 ? 1 : 0;
                const Index j1 = dj > 0 ? w - 1 : w;
                for (Index j = j0; j < j1; ++j) d[j + dj] += s[j];
            }
        }
    }
}

template <class Scalar>
Eigen::Map<const MatrixRM<Scalar>> filter_matrix(const ConvParams<Scalar>& p) {
    return {p.weights.data(), p.c_out(), p.c_in() * 9};
}

} // namespace detail

template <class Scalar>
Tensor4<Scalar> conv2d_forward(const Tensor4<Scalar>& input, const ConvParams<Scalar>& p) {
    p.validate();
    if (input.c() != p.c_in())
        throw ShapeError("conv2d_forward: input has " + std::to_string(input.c()) + " channels, filters expect " +
                         std::to_string(p.c_in()));
    const Index h = input.h(), w = input.w();
    Tensor4<Scalar> out(Shape4{input.n(), p.c_out(), h, w});
    const auto filters = detail::filter_matrix(p);
    const Index band = std::min(detail::conv_band_rows(w), h);
    MatrixRM<Scalar> col(p.c_in() * 9, band * w);

    for (Index b = 0; b < input.n(); ++b) {
        const Scalar* src = input.data() + b * input.c() * h * w;
        auto dst = out.image(b);
        for (Index row0 = 0; row0 < h; row0 += band) {
            const Index rows = std::min(band, h - row0);
            detail::im2col_band(src, input.c(), h, w, row0, rows, col);
            dst.middleCols(row0 * w, rows * w).noalias() = filters * col.leftCols(rows * w);
        }
        dst.colwise() += p.bias;
    }
    return out;
}

/// Gradients of sum(grad_out * conv2d_forward(input, p)) with respect to the
/// input, the weights and the bias. The input gradient is skipped (left at
/// zero) when `need_input_grad` is false.
template <class Scalar>
ConvGradients<Scalar> conv2d_backward(const Tensor4<Scalar>& input, const ConvParams<Scalar>& p,
                                      const Tensor4<Scalar>& grad_out, bool need_input_grad = true) {
    p.validate();
    if (input.c() != p.c_in())
        throw ShapeError("conv2d_backward: input has " + std::to_string(input.c()) + " channels, filters expect " +
                         std::to_string(p.c_in()));
    const Shape4 expected{input.n(), p.c_out(), input.h(), input.w()};
    if (grad_out.shape() != expected)
        throw ShapeError("conv2d_backward: grad_out shape " + to_string(grad_out.shape()) + ", expected " +
                         to_string(expected));

    const Index h = input.h(), w = input.w();
    const Index k = p.c_in() * 9;
    ConvGradients<Scalar> g{Tensor4<Scalar>(input.shape()), Tensor4<Scalar>(p.weights.shape()),
                            VectorX<Scalar>::Zero(p.c_out())};
    Eigen::Map<MatrixRM<Scalar>> grad_filters(g.weights.data(), p.c_out(), k);
    const auto filters = detail::filter_matrix(p);
    const Index band = std::min(detail::conv_band_rows(w), h);
    MatrixRM<Scalar> col(k, band * w);
    MatrixRM<Scalar> grad_col(k, band * w);

    for (Index b = 0; b < input.n(); ++b) {
        const Scalar* src = input.data() + b * input.c() * h * w;
        const auto go = grad_out.image(b);
        g.bias += go.rowwise().sum();
        for (Index row0 = 0; row0 < h; row0 += band) {
            const Index rows = std::min(band, h - row0);
            const auto go_band = go.middleCols(row0 * w, rows * w);
            detail::im2col_band(src, input.c(), h, w, row0, rows, col);
            grad_filters.noalias() += go_band * col.leftCols(rows * w).transpose();
            if (need_input_grad) {
                grad_col.leftCols(rows * w).noalias() = filters.transpose() * go_band;
                detail::col2im_band_add(grad_col, input.c(), h, w, row0, rows,
                                        g.input.data() + b * input.c() * h * w);
            }
        }
    }
    return g;
}

} // namespace dncnn
