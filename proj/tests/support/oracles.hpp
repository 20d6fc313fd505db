#pragma once

#include <cmath>
#include <functional>

#include "dncnn/tensor.hpp"

namespace oracle {

using dncnn::Index;
using dncnn::Shape4;
using dncnn::Tensor4;

// Direct 7-loop 3x3 cross-correlation with zero padding 1.
template <class S>
Tensor4<S> conv2d_naive(const Tensor4<S>& x, const dncnn::ConvParams<S>& p) {
    Tensor4<S> y(Shape4{x.n(), p.c_out(), x.h(), x.w()});
    for (Index b = 0; b < x.n(); ++b)
        for (Index o = 0; o < p.c_out(); ++o)
            for (Index i = 0; i < x.h(); ++i)
                for (Index j = 0; j < x.w(); ++j) {
                    S acc = p.bias[o];
                    for (Index c = 0; c < x.c(); ++c)
                        for (Index u = 0; u < 3; ++u)
                            for (Index v = 0; v < 3; ++v) {
                                const Index si = i + u - 1, sj = j + v - 1;
                                if (si < 0 || si >= x.h() || sj < 0 || sj >= x.w()) continue;
                                acc += p.weights(o, c, u, v) * x(b, c, si, sj);
                            }
                    y(b, o, i, j) = acc;
                }
    return y;
}

// Central difference of f with respect to v[k]; v is restored afterwards.
template <class Vec>
double central_diff(const std::function<double()>& f, Vec& v, Index k, double h = 1e-3) {
    const auto saved = v[k];
    v[k] = saved + h;
    const double up = f();
    v[k] = saved - h;
    const double down = f();
    v[k] = saved;
    return (up - down) / (2 * h);
}

inline double rel_error(double a, double n, double floor = 1e-8) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

template <class S>
S dot(const Tensor4<S>& a, const Tensor4<S>& b) {
    return a.values().dot(b.values());
}

} // namespace oracle
