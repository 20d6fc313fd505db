#pragma once

#include "dncnn/tensor.hpp"

namespace dncnn {

template <class Scalar>
Tensor4<Scalar> relu_forward(Tensor4<Scalar> input) {
    input.values() = input.values().cwiseMax(Scalar(0));
    return input;
}

/// Passes grad_out where input > 0. The subgradient at exactly 0 is 0, so the
/// ReLU output can stand in for its input here.
template <class Scalar>
Tensor4<Scalar> relu_backward(const Tensor4<Scalar>& input, Tensor4<Scalar> grad_out) {
    require_same_shape(input, grad_out, "relu_backward");
    grad_out.values() = (input.values().array() > Scalar(0)).select(grad_out.values(), Scalar(0));
    return grad_out;
}

} // namespace dncnn
