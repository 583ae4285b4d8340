#pragma once

#include <cmath>
#include <vector>

#include "reswvl/core/tensor.hpp"

namespace reswvl {

/// AdamW: Adam moments plus decoupled weight decay applied directly to the
/// parameters (not through the gradient).
template <typename T>
class AdamW {
public:
    struct Options {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    AdamW() = default;
    explicit AdamW(std::vector<Param<T>*> params, Options opt = {})
        : params_(std::move(params)), opt_(opt) {
        for (const auto* p : params_) slots_.push_back({Tensor<T>(p->value.shape), Tensor<T>(p->value.shape)});
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(opt_.beta1, t_);
        const double bc2 = 1.0 - std::pow(opt_.beta2, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            auto& m = slots_[i].m;
            auto& v = slots_[i].v;
            for (std::size_t j = 0; j < p.value.numel(); ++j) {
                const double g = static_cast<double>(p.grad.data[j]);
                const double mj = opt_.beta1 * static_cast<double>(m.data[j]) + (1.0 - opt_.beta1) * g;
                const double vj = opt_.beta2 * static_cast<double>(v.data[j]) + (1.0 - opt_.beta2) * g * g;
                m.data[j] = static_cast<T>(mj);
                v.data[j] = static_cast<T>(vj);
                double w = static_cast<double>(p.value.data[j]);
                w -= lr * opt_.weight_decay * w;
                w -= lr * (mj / bc1) / (std::sqrt(vj / bc2) + opt_.eps);
                p.value.data[j] = static_cast<T>(w);
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    long step_count() const { return t_; }

    /// Moment tensors and step counter, for checkpointing.
    template <typename Fn>
    void visit_state(Fn&& fn) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            fn(params_[i]->name + ".adam_m", slots_[i].m);
            fn(params_[i]->name + ".adam_v", slots_[i].v);
        }
    }

    void set_step_count(long t) { t_ = t; }

private:
    struct Slot {
        Tensor<T> m, v;
    };
    std::vector<Param<T>*> params_;
    std::vector<Slot> slots_;
    Options opt_;
    long t_ = 0;
};

/// Cosine annealing toward zero across `total` epochs (epoch 0 = base rate).
inline double cosine_lr(double base, int epoch, int total) {
    if (total <= 1) return base;
    const double x = static_cast<double>(epoch) / static_cast<double>(total);
    return base * 0.5 * (1.0 + std::cos(3.14159265358979323846 * x));
}

}  // namespace reswvl
