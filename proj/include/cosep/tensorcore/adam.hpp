#pragma once

#include <cstdint>
#include <vector>

#include "cosep/tensorcore/params.hpp"

namespace cosep {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// Adam with bias correction and decoupled weight decay. Moments are kept per
// parameter in store order. Parameters whose touched flag is clear are left
// alone (no decay, no moment update), so a loss that never reaches a
// sub-network does not move it.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Throws std::runtime_error naming the parameter if a gradient is not finite.
  // Validation happens before any parameter is modified.
  void step(ParameterStore& store);

  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::int64_t t() const { return t_; }

  struct Moments {
    Tensor m, v;
  };
  const std::vector<Moments>& moments() const { return moments_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Moments> moments_;
};

}  // namespace cosep
