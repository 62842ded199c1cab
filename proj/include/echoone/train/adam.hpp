// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "echoone/core/nn.hpp"

namespace echoone {

/// Adam with bias correction. Moments exist for every parameter (zeros for
/// frozen ones) so checkpoints are layout-stable under freeze toggles.
template <typename T>
class Adam {
 public:
  Adam(ParamStore<T>& params, T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& e : params.entries()) {
      m_.emplace(e.name, Tensor<T>::zeros(e.var->value.shape()));
      v_.emplace(e.name, Tensor<T>::zeros(e.var->value.shape()));
    }
  }

  void set_lr(T lr) { lr_ = lr; }
  T lr() const { return lr_; }
  long step_count() const { return t_; }

  /// Applies one update from the gradients currently held by the parameters.
  /// Frozen parameters and parameters with no gradient buffer are skipped.
  void step() {
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (const auto& e : params_.entries()) {
      if (!e.var->requires_grad || e.var->grad.size() == 0) continue;
      auto& m = m_.at(e.name);
      auto& v = v_.at(e.name);
      const auto& g = e.var->grad.array();
      m.array() = beta1_ * m.array() + (T(1) - beta1_) * g;
      v.array() = beta2_ * v.array() + (T(1) - beta2_) * g * g;
      e.var->value.array() -=
          lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
    }
  }

  /// Moment tensors for checkpointing, keyed "m.<param>" / "v.<param>".
  std::map<std::string, Tensor<T>> state() const {
    std::map<std::string, Tensor<T>> out;
    for (const auto& [k, t] : m_) out.emplace("m." + k, t);
    for (const auto& [k, t] : v_) out.emplace("v." + k, t);
    return out;
  }

  void load_state(const std::map<std::string, Tensor<T>>& state, long t) {
    t_ = t;
    for (auto& [k, tns] : m_) {
      auto it = state.find("m." + k);
      if (it == state.end()) throw DataError("checkpoint lacks optimizer moment m." + k);
      tns.array() = it->second.array();
    }
    for (auto& [k, tns] : v_) {
      auto it = state.find("v." + k);
      if (it == state.end()) throw DataError("checkpoint lacks optimizer moment v." + k);
      tns.array() = it->second.array();
    }
  }

 private:
  ParamStore<T>& params_;
  T lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Tensor<T>> m_, v_;
};

}  // namespace echoone
