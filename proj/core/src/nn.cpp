#include "acl/nn.hpp"

#include <cmath>

#include "acl/errors.hpp"

namespace acl {

LinearLayer::LinearLayer(std::size_t in, std::size_t out, std::uint64_t seed) {
  weight_ = Tensor::zeros({in, out});
  bias_ = Tensor::zeros({out});
  weight_.set_requires_grad(true);
  bias_.set_requires_grad(true);
  init_glorot(seed);
}

void LinearLayer::init_glorot(std::uint64_t seed) {
  Rng rng(seed);
  const double bound =
      std::sqrt(6.0 / static_cast<double>(in_features() + out_features()));
  auto w = weight_.values_mut();
  for (auto& v : w) v = rng.uniform(-bound, bound);
  auto b = bias_.values_mut();
  for (auto& v : b) v = 0.0;
}

Tensor LinearLayer::forward(Graph& g, const Tensor& x) const {
  return add_rowwise(g, matmul(g, x, weight_), bias_);
}

void LinearLayer::set_trainable(bool trainable) {
  weight_.set_requires_grad(trainable);
  bias_.set_requires_grad(trainable);
}

bool LinearLayer::trainable() const { return weight_.requires_grad(); }

Mlp::Mlp(const std::vector<std::size_t>& dims, bool terminal_relu, std::uint64_t seed)
    : terminal_relu_(terminal_relu) {
  if (dims.size() < 2) throw ConfigError("Mlp: need at least input and output dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers_.emplace_back(dims[i], dims[i + 1], Rng::mix(seed, i));
  }
}

Tensor Mlp::forward(Graph& g, const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(g, h);
    if (i + 1 < layers_.size() || terminal_relu_) h = relu(g, h);
  }
  return h;
}

void Mlp::set_trainable(bool trainable) {
  for (auto& l : layers_) l.set_trainable(trainable);
}

bool Mlp::trainable() const {
  for (const auto& l : layers_) {
    if (!l.trainable()) return false;
  }
  return true;
}

std::size_t Mlp::in_features() const { return layers_.front().in_features(); }
std::size_t Mlp::out_features() const { return layers_.back().out_features(); }

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.param_count();
  return n;
}

std::vector<Tensor> Mlp::params() const {
  std::vector<Tensor> out;
  for (const auto& l : layers_) {
    for (auto& p : l.params()) out.push_back(p);
  }
  return out;
}

void SgdOptimizer::add_params(const std::vector<Tensor>& params) {
  for (const auto& p : params) params_.push_back(p);
}

void SgdOptimizer::clear_params() { params_.clear(); }

void SgdOptimizer::step() {
  for (auto& p : params_) {
    if (!p.requires_grad()) continue;  // frozen: left bit-identical
    if (!p.has_grad()) {
      throw ContractError("SgdOptimizer::step: trainable parameter of shape " +
                          shape_str(p.shape()) + " has no gradient");
    }
    auto v = p.values_mut();
    auto gspan = p.grad();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr_ * gspan[i];
  }
  reset_grads();
}

void SgdOptimizer::reset_grads() {
  for (auto& p : params_) p.reset_grad();
}

bool PlateauDecay::observe(double validation_loss) {
  if (!has_best_ || validation_loss < best_) {
    best_ = validation_loss;
    has_best_ = true;
    stale_ = 0;
    return false;
  }
  if (++stale_ >= patience_) {
    stale_ = 0;
    return true;
  }
  return false;
}

}  // namespace acl
