#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dncnn/model.hpp"

namespace dncnn {

// Finite-difference certification of the hand-written backward passes. All
// checks run in double precision with central differences; the relative
// error of one coordinate is |a - n| / max(|a|, |n|, abs_floor).

struct GradCheckOptions {
    double step = 1e-3;
    Index samples_per_tensor = 200;  // every coordinate when the tensor is smaller
    std::uint64_t seed = 0;
    double tolerance = 1e-3;
    double abs_floor = 1e-6;
};

struct TensorCheck {
    std::string name;
    Index size = 0;
    Index checked = 0;
    // Coordinates whose +-step perturbation flips the sign of some ReLU input;
    // the loss is not differentiable across the kink, so they are excluded.
    Index kink_crossings = 0;
    double max_rel_error = 0;
};

struct GradCheckReport {
    std::vector<TensorCheck> tensors;
    double max_rel_error = 0;
    double tolerance = 0;
    bool passed = false;

    std::string text() const;
};

struct Probe {
    Tensor4<double> noisy;
    Tensor4<double> clean;
};

/// Clean values uniform in [0, 1], noisy = clean + N(0, 0.1^2).
Probe make_probe(Index batch, Index channels, Index h, Index w, std::uint64_t seed);

using BackwardFn = std::function<Gradients<double>(const DnCNN<double>&, const ForwardCache<double>&,
                                                   const Tensor4<double>&)>;

/// Compares backward() (or `bwd`) against central differences of the full
/// residual loss for a sample of coordinates of every trainable tensor.
GradCheckReport grad_check(const DnCNN<double>& model, const Probe& probe, const GradCheckOptions& options = {},
                           const BackwardFn& bwd = {});

struct KernelCheck {
    std::string name;
    Index checked = 0;
    double max_rel_error = 0;
    bool passed = false;
};

inline constexpr double kKernelTolerance = 1e-4;

// Each uses f = sum(r * op(inputs)) for a random r and checks every input and
// parameter coordinate of a small random instance.
KernelCheck check_conv_kernel(std::uint64_t seed, double tolerance = kKernelTolerance);
KernelCheck check_relu_kernel(std::uint64_t seed, double tolerance = kKernelTolerance);
KernelCheck check_batchnorm_kernel(std::uint64_t seed, double tolerance = kKernelTolerance);

} // namespace dncnn
