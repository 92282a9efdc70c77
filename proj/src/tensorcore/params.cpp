#include "cosep/tensorcore/params.hpp"

#include <cmath>
#include <stdexcept>

namespace cosep {

Parameter& ParameterStore::add(std::string name, Tensor init, double lr_scale) {
  if (has_param(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  Parameter p;
  p.name = std::move(name);
  p.grad = Tensor(init.shape(), 0.0);
  p.value = std::move(init);
  p.lr_scale = lr_scale;
  params_.push_back(std::move(p));
  return params_.back();
}

Buffer& ParameterStore::add_buffer(std::string name, Tensor init) {
  for (const auto& b : buffers_) {
    if (b.name == name) throw std::invalid_argument("duplicate buffer '" + name + "'");
  }
  buffers_.push_back(Buffer{std::move(name), std::move(init)});
  return buffers_.back();
}

Parameter& ParameterStore::param(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

const Parameter& ParameterStore::param(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->param(name);
}

Buffer& ParameterStore::buffer(std::string_view name) {
  for (auto& b : buffers_) {
    if (b.name == name) return b;
  }
  throw std::out_of_range("no buffer named '" + std::string(name) + "'");
}

const Buffer& ParameterStore::buffer(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->buffer(name);
}

bool ParameterStore::has_param(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) {
    if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape(), 0.0);
    p.grad.fill(0.0);
    p.touched = false;
  }
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Tensor he_normal(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace cosep
