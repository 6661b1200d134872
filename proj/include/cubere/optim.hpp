#pragma once

#include <cmath>
#include <cstddef>
#include <unordered_map>

#include "cubere/tensor.hpp"

namespace cubere {

// Linear warmup to the peak over ceil(warmup_fraction * total) steps, then
// linear decay to zero at the final step. Steps are 1-based.
class LinearWarmupSchedule {
 public:
  LinearWarmupSchedule(double peak, std::size_t total_steps, double warmup_fraction)
      : peak_(peak), total_(total_steps), warmup_(static_cast<std::size_t>(std::ceil(warmup_fraction * double(total_steps)))) {
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) throw ConfigError("warmup fraction must lie in [0, 1)");
  }

  std::size_t warmup_steps() const { return warmup_; }
  std::size_t total_steps() const { return total_; }

  double at(std::size_t step) const {
    if (step == 0 || total_ == 0) return 0.0;
    if (step <= warmup_) return peak_ * double(step) / double(warmup_);
    if (step >= total_) return 0.0;
    return peak_ * double(total_ - step) / double(total_ - warmup_);
  }

 private:
  double peak_;
  std::size_t total_;
  std::size_t warmup_;
};

template <typename T>
double global_grad_norm(const ParamRefs<T>& params) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

// Rescales all gradients so their joint L2 norm is at most `max_norm`.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(const ParamRefs<T>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / (norm + 1e-6));
    for (auto* p : params) p->grad *= scale;
  }
  return norm;
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-12;
  double weight_decay = 1e-5;
  double layer_decay = 1.0;  // lr multiplier per unit of Parameter::depth
};

// Adam with bias correction and decoupled weight decay.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig config) : config_(config) {}

  void step(const ParamRefs<T>& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, double(t_));
    for (auto* p : params) {
      auto& st = state_[p];
      if (st.m.size() == 0) {
        st.m = Mat<T>::Zero(p->value.rows(), p->value.cols());
        st.v = Mat<T>::Zero(p->value.rows(), p->value.cols());
      }
      st.m = T(config_.beta1) * st.m + T(1 - config_.beta1) * p->grad;
      st.v = T(config_.beta2) * st.v + T(1 - config_.beta2) * p->grad.cwiseProduct(p->grad);
      const double plr = lr * std::pow(config_.layer_decay, p->depth);
      if (plr == 0.0) continue;
      const T step_size = static_cast<T>(plr / bc1);
      const T denom_scale = static_cast<T>(1.0 / std::sqrt(bc2));
      p->value.array() -= step_size * st.m.array() / (st.v.array().sqrt() * denom_scale + T(config_.epsilon));
      if (p->decay && config_.weight_decay > 0) p->value *= static_cast<T>(1.0 - plr * config_.weight_decay);
    }
  }

  std::size_t steps() const { return t_; }

 private:
  struct State {
    Mat<T> m, v;
  };
  AdamWConfig config_;
  std::size_t t_ = 0;
  std::unordered_map<const Parameter<T>*, State> state_;
};

}  // namespace cubere
