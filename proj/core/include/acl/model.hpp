#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"

#include "acl/nn.hpp"
#include "acl/tensor.hpp"

namespace acl {

/// Architecture and loss-weighting configuration.
///
/// Defaults are the MNIST-scale sizes: shared 784→175→128, one private
/// 784→128 per task, heads with hidden 256→28 onto C logits, and a
/// discriminator 128→64→64→(T+1) whose output index 0 is the fake label.
struct AclConfig {
  std::size_t input_dim = 784;
  std::vector<std::size_t> shared_hidden = {175};
  std::size_t latent_dim_s = 128;
  std::size_t latent_dim_p = 128;
  std::vector<std::size_t> private_hidden = {};  // single layer by default
  std::vector<std::size_t> head_hidden = {256, 28};
  std::size_t classes_per_task = 2;
  std::size_t max_tasks = 5;
  std::vector<std::size_t> discriminator_hidden = {64, 64};

  double lambda_adv = 0.05;
  double lambda_task = 1.0;
  double lambda_diff = 0.1;

  // Fake-feature noise z' ~ N(mean, stddev²·I) in the shared latent space.
  double noise_mean = 0.0;
  double noise_stddev = 1.0;

  // Structural switches for the ablation grid. The discriminator needs the
  // shared module; the heads need at least one encoder.
  bool use_shared = true;
  bool use_private = true;
  bool use_discriminator = true;

  std::size_t head_input_dim() const;
  void validate() const;  // throws ConfigError

  bool operator==(const AclConfig&) const = default;
};

void to_json(nlohmann::json& j, const AclConfig& c);
void from_json(const nlohmann::json& j, AclConfig& c);

/// The growing shared/private architecture.
///
/// One private encoder and one head exist per seen task; all but the newest
/// pair are frozen. The shared encoder and the discriminator persist across
/// tasks. Evaluation needs the task identity (task-incremental protocol).
class AclModel {
 public:
  AclModel() = default;

  static AclModel build(const AclConfig& config, std::uint64_t seed);

  /// Freezes the newest private/head pair and appends a freshly initialized
  /// one. Throws CapacityError past config.max_tasks.
  void grow(std::uint64_t seed);

  std::size_t seen_tasks() const { return heads_.size(); }

  /// head_k(z_P ⊕ z_S) logits for 1-based task k.
  Tensor forward_task(Graph& g, const Tensor& x, std::size_t task) const;
  /// Raw task-label logits (n×(T+1)) from shared-latent features.
  Tensor forward_discriminator(Graph& g, const Tensor& z) const;

  Tensor forward_shared(Graph& g, const Tensor& x) const;
  Tensor forward_private(Graph& g, const Tensor& x, std::size_t task) const;
  Tensor forward_head(Graph& g, const Tensor& z, std::size_t task) const;

  const AclConfig& config() const { return config_; }

  bool has_shared() const { return config_.use_shared; }
  bool has_discriminator() const { return config_.use_discriminator; }
  bool privates_used() const { return config_.use_private; }

  Mlp& shared() { return shared_; }
  const Mlp& shared() const { return shared_; }
  Mlp& discriminator() { return discriminator_; }
  const Mlp& discriminator() const { return discriminator_; }
  Mlp& private_module(std::size_t task) { return privates_.at(task - 1); }
  const Mlp& private_module(std::size_t task) const { return privates_.at(task - 1); }
  Mlp& head(std::size_t task) { return heads_.at(task - 1); }
  const Mlp& head(std::size_t task) const { return heads_.at(task - 1); }

  std::vector<Tensor> shared_params() const;
  std::vector<Tensor> discriminator_params() const;
  /// Private module + head of the newest (trainable) task.
  std::vector<Tensor> current_task_params() const;
  std::vector<Tensor> all_params() const;

  std::size_t param_count() const;
  std::size_t shared_param_count() const { return has_shared() ? shared_.param_count() : 0; }
  std::size_t discriminator_param_count() const {
    return has_discriminator() ? discriminator_.param_count() : 0;
  }
  /// Parameters added by one grow step (one private module + one head).
  std::size_t per_task_param_count() const;

  void freeze_shared();
  bool shared_frozen() const;

  void save(const std::filesystem::path& path) const;
  static AclModel load(const std::filesystem::path& path);

 private:
  AclConfig config_;
  Mlp shared_;
  std::vector<Mlp> privates_;
  std::vector<Mlp> heads_;
  Mlp discriminator_;

  Mlp make_private(std::uint64_t seed) const;
  Mlp make_head(std::uint64_t seed) const;
};

}  // namespace acl
