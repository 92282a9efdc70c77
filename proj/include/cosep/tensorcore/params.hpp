#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cosep/tensorcore/tensor.hpp"

namespace cosep {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Multiplier on the optimizer learning rate for this parameter.
  double lr_scale = 1.0;
  // Set by Graph::backward when the parameter took part in the loss.
  bool touched = false;
};

// Non-trainable state saved with the parameters (BatchNorm running stats).
struct Buffer {
  std::string name;
  Tensor value;
};

// Owns every trainable parameter and buffer of a model, in creation order.
// References returned by add()/add_buffer() stay valid for the store's life.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor init, double lr_scale = 1.0);
  Buffer& add_buffer(std::string name, Tensor init);

  Parameter& param(std::string_view name);
  const Parameter& param(std::string_view name) const;
  Buffer& buffer(std::string_view name);
  const Buffer& buffer(std::string_view name) const;
  bool has_param(std::string_view name) const;

  std::deque<Parameter>& params() { return params_; }
  const std::deque<Parameter>& params() const { return params_; }
  std::deque<Buffer>& buffers() { return buffers_; }
  const std::deque<Buffer>& buffers() const { return buffers_; }

  // Zeroes every gradient and clears the touched flags.
  void zero_grad();
  std::size_t num_scalars() const;

 private:
  std::deque<Parameter> params_;
  std::deque<Buffer> buffers_;
};

// Zero-mean Gaussian with std = sqrt(2 / fan_in).
Tensor he_normal(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace cosep
