#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dncnn/tensor.hpp"

namespace dncnn {

enum class OptimizerKind { SgdMomentum, Adam };

OptimizerKind optimizer_kind_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double momentum = 0.9;  // SGD momentum, or Adam beta1
    double beta2 = 0.999;
    double eps = 1e-8;
    std::optional<double> max_grad_norm;  // global L2 clipping, off when unset
};

/// Constant rate with an optional single step decay.
struct LrSchedule {
    double base = 1e-3;
    std::optional<int> decay_epoch;
    double decay_factor = 0.1;

    double at(int epoch) const { return decay_epoch && epoch >= *decay_epoch ? base * decay_factor : base; }
};

/// SGD with momentum (v = mu v + g; w -= lr v) or Adam with bias correction.
/// Moment buffers are allocated on the first step and must keep their shapes.
template <class Scalar>
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config) : config_(config) {
        if (!(config_.lr > 0)) throw std::invalid_argument("learning rate must be positive");
        if (config_.momentum < 0 || config_.momentum >= 1) throw std::invalid_argument("momentum must lie in [0, 1)");
        if (config_.beta2 < 0 || config_.beta2 >= 1) throw std::invalid_argument("beta2 must lie in [0, 1)");
        if (!(config_.eps > 0)) throw std::invalid_argument("eps must be positive");
        if (config_.max_grad_norm && !(*config_.max_grad_norm > 0))
            throw std::invalid_argument("max_grad_norm must be positive");
    }

    const OptimizerConfig& config() const { return config_; }
    double learning_rate() const { return config_.lr; }
    void set_learning_rate(double lr) {
        if (!(lr > 0)) throw std::invalid_argument("learning rate must be positive");
        config_.lr = lr;
    }
    long step_count() const { return steps_; }

    void step(std::span<GradPair<Scalar>> params) {
        ensure_buffers(params);
        ++steps_;
        const Scalar clip = clip_scale(params);
        const auto lr = static_cast<Scalar>(config_.lr);
        const auto mu = static_cast<Scalar>(config_.momentum);
        if (config_.kind == OptimizerKind::SgdMomentum) {
            for (std::size_t i = 0; i < params.size(); ++i) {
                first_[i] = mu * first_[i] + clip * params[i].grad;
                params[i].value -= lr * first_[i];
            }
            return;
        }
        const auto b2 = static_cast<Scalar>(config_.beta2);
        const auto eps = static_cast<Scalar>(config_.eps);
        const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(config_.momentum, steps_));
        const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(config_.beta2, steps_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            first_[i] = mu * first_[i] + (Scalar(1) - mu) * clip * params[i].grad;
            second_[i] = b2 * second_[i] + (Scalar(1) - b2) * (clip * params[i].grad).cwiseAbs2();
            params[i].value.array() -= lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + eps);
        }
    }

private:
    void ensure_buffers(std::span<GradPair<Scalar>> params) {
        if (first_.empty() && steps_ == 0) {
            for (const auto& p : params) {
                first_.push_back(VectorX<Scalar>::Zero(p.value.size()));
                if (config_.kind == OptimizerKind::Adam) second_.push_back(VectorX<Scalar>::Zero(p.value.size()));
            }
            return;
        }
        if (params.size() != first_.size())
            throw ShapeError("optimizer tracks " + std::to_string(first_.size()) + " tensors, step given " +
                             std::to_string(params.size()));
        for (std::size_t i = 0; i < params.size(); ++i)
            if (params[i].value.size() != first_[i].size())
                throw ShapeError("optimizer buffer " + std::to_string(i) + " has " + std::to_string(first_[i].size()) +
                                 " entries, parameter has " + std::to_string(params[i].value.size()));
    }

    Scalar clip_scale(std::span<GradPair<Scalar>> params) const {
        if (!config_.max_grad_norm) return Scalar(1);
        double sq = 0;
        for (const auto& p : params) sq += p.grad.template cast<double>().squaredNorm();
        const double norm = std::sqrt(sq);
        return norm > *config_.max_grad_norm ? static_cast<Scalar>(*config_.max_grad_norm / norm) : Scalar(1);
    }

    OptimizerConfig config_;
    long steps_ = 0;
    std::vector<VectorX<Scalar>> first_;
    std::vector<VectorX<Scalar>> second_;
};

inline OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "sgd") return OptimizerKind::SgdMomentum;
    throw std::invalid_argument("unknown optimizer '" + name + "' (expected adam or sgd)");
}

inline std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "sgd"; }

} // namespace dncnn
