#include "cosep/tensorcore/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cosep {

void Adam::step(ParameterStore& store) {
  auto& params = store.params();
  for (const auto& p : params) {
    if (!p.touched) continue;
    if (p.grad.shape() != p.value.shape()) {
      throw std::invalid_argument("adam: gradient shape " + shape_str(p.grad.shape()) +
                                  " does not match parameter '" + p.name + "' " +
                                  shape_str(p.value.shape()));
    }
    for (double g : p.grad.data()) {
      if (!std::isfinite(g)) {
        throw std::runtime_error("adam: non-finite gradient in parameter '" + p.name + "'");
      }
    }
  }
  while (moments_.size() < params.size()) {
    const auto& p = params[moments_.size()];
    moments_.push_back({Tensor(p.value.shape(), 0.0), Tensor(p.value.shape(), 0.0)});
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.touched) continue;
    const double lr = cfg_.lr * p.lr_scale;
    double* w = p.value.ptr();
    const double* g = p.grad.ptr();
    double* m = moments_[i].m.ptr();
    double* v = moments_[i].v.ptr();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      w[k] -= lr * cfg_.weight_decay * w[k];
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace cosep
