#include "phosc/net/adam.hpp"

#include <cmath>

namespace phosc::net {

template <class T>
void Adam<T>::step(ParamStore<T>& params, const ParamStore<T>& grads, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != m_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "parameter, gradient and moment stores differ in layout");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || params[i].shape() != m_[i].shape()) {
      throw Error(ErrorCode::kShapeMismatch, "shape mismatch for '" + params.name(i) + "'");
    }
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(steps_));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T lr = static_cast<T>(cfg.learning_rate), wd = static_cast<T>(cfg.weight_decay);
  const T eps = static_cast<T>(cfg.epsilon);
  const T inv_c1 = static_cast<T>(1.0 / c1), inv_c2 = static_cast<T>(1.0 / c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i].data();
    const T* g = grads[i].data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      m[j] = b1 * m[j] + (T{1} - b1) * g[j];
      v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
      const T m_hat = m[j] * inv_c1;
      const T v_hat = v[j] * inv_c2;
      p[j] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + wd * p[j]);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace phosc::net
