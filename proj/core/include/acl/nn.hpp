#pragma once

#include <cstdint>
#include <vector>

#include "acl/rng.hpp"
#include "acl/tensor.hpp"

namespace acl {

/// Fully connected layer: y = x·W + b with W of shape in×out.
class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(std::size_t in, std::size_t out, std::uint64_t seed);

  Tensor forward(Graph& g, const Tensor& x) const;

  /// Glorot-uniform weights in ±sqrt(6/(in+out)), zero biases.
  void init_glorot(std::uint64_t seed);

  void set_trainable(bool trainable);
  bool trainable() const;

  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }
  std::size_t param_count() const { return weight_.size() + bias_.size(); }
  std::vector<Tensor> params() const { return {weight_, bias_}; }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

/// Stack of linear layers with ReLU between consecutive layers and an
/// optional ReLU after the last one.
class Mlp {
 public:
  Mlp() = default;
  /// dims = {in, hidden..., out}; needs at least two entries.
  Mlp(const std::vector<std::size_t>& dims, bool terminal_relu, std::uint64_t seed);

  Tensor forward(Graph& g, const Tensor& x) const;

  void set_trainable(bool trainable);
  bool trainable() const;

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t in_features() const;
  std::size_t out_features() const;
  std::size_t param_count() const;
  std::vector<Tensor> params() const;

  LinearLayer& layer(std::size_t i) { return layers_.at(i); }
  const LinearLayer& layer(std::size_t i) const { return layers_.at(i); }
  bool terminal_relu() const { return terminal_relu_; }

 private:
  std::vector<LinearLayer> layers_;
  bool terminal_relu_ = false;
};

/// Plain stochastic gradient descent over an explicit parameter set.
///
/// step() applies θ ← θ − α·∇θ to trainable parameters (requires_grad set),
/// throws ContractError if such a parameter has no populated gradient, leaves
/// frozen parameters bit-identical, and finally drops all gradients so the
/// next step demands a fresh backward pass.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double lr = 0.05) : lr_(lr) {}

  void add_params(const std::vector<Tensor>& params);
  void clear_params();
  std::size_t num_params() const { return params_.size(); }

  void step();
  void reset_grads();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  void scale_lr(double factor) { lr_ *= factor; }

 private:
  double lr_;
  std::vector<Tensor> params_;
};

/// Multiplies learning rates by `factor` whenever the observed validation
/// loss has not improved for `patience` consecutive observations.
class PlateauDecay {
 public:
  PlateauDecay(double factor = 0.8, int patience = 3)
      : factor_(factor), patience_(patience) {}

  /// Feed one validation loss per epoch; returns true when a decay fires.
  bool observe(double validation_loss);

  double factor() const { return factor_; }

 private:
  double factor_;
  int patience_;
  int stale_ = 0;
  bool has_best_ = false;
  double best_ = 0.0;
};

}  // namespace acl
