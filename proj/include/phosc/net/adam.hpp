#pragma once

#include <cstdint>

#include "phosc/net/params.hpp"

namespace phosc::net {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled: p -= lr * wd * p
};

// Adam with bias correction and decoupled weight decay.
template <class T>
class Adam {
 public:
  explicit Adam(const ParamStore<T>& like) : m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(ParamStore<T>& params, const ParamStore<T>& grads, const AdamConfig& cfg);
  std::int64_t step_count() const { return steps_; }
  const ParamStore<T>& first_moment() const { return m_; }
  const ParamStore<T>& second_moment() const { return v_; }

 private:
  ParamStore<T> m_;
  ParamStore<T> v_;
  std::int64_t steps_ = 0;
};

}  // namespace phosc::net
