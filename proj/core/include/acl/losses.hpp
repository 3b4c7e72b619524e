#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "acl/model.hpp"
#include "acl/rng.hpp"
#include "acl/tensor.hpp"

namespace acl {

/// One optimization batch drawn from the current task and the replay memory.
/// y is the within-task class label in [0, C); t is the 1-based task label
/// (0 is reserved for fake noise features and never appears here).
struct JointBatch {
  Tensor x;  // n×input_dim leaf
  std::vector<std::size_t> y;
  std::vector<std::size_t> t;
  std::vector<std::uint8_t> from_memory;

  std::size_t size() const { return y.size(); }
  /// ContractError on ragged fields, t == 0, or empty batch.
  void validate() const;
};

struct Lambdas {
  double adv = 0.05;
  double task = 1.0;
  double diff = 0.1;
};

/// Row indices grouped by task label, ascending task id.
std::map<std::size_t, std::vector<std::size_t>> rows_by_task(const JointBatch& batch);

/// Mean cross-entropy over the joint batch, each sample routed through its
/// own task's private module and head.
Tensor task_loss(Graph& g, const AclModel& model, const JointBatch& batch);

/// Cross-entropy of D(GRL(S(x))) against the true task labels. Descending
/// this loss in θ_S ascends D's error; θ_D must be excluded from the
/// optimizer step that consumes it (it still receives gradient here).
Tensor adv_loss_for_s(Graph& g, const AclModel& model, const JointBatch& batch);

/// Discriminator loss over real encoded features (labels t) plus noise_n
/// standard-normal rows labeled 0. The shared features are detached, so
/// only θ_D receives gradient.
Tensor adv_loss_for_d(Graph& g, const AclModel& model, const JointBatch& batch,
                      std::size_t noise_n, Rng& rng);

/// ‖S(x)ᵀ P^k(x)‖²_F over the given rows (orthogonality pressure).
Tensor diff_loss(Graph& g, const AclModel& model, const Tensor& x, std::size_t task);

/// Variant that also adds one term per memory task group, each routed
/// through its own private module.
Tensor diff_loss_with_memory(Graph& g, const AclModel& model, const JointBatch& batch,
                             std::size_t current_task);

/// λ₁·l_adv + λ₂·l_task + λ₃·l_diff, graph-connected to all constituents.
Tensor total_loss(Graph& g, const Lambdas& lambdas, const Tensor& l_adv,
                  const Tensor& l_task, const Tensor& l_diff);

/// Per-batch loss terms with the shared encoder evaluated once per task
/// group and reused across the task/adversarial/difference terms. Values
/// match the standalone operations up to summation order.
struct BatchLossTerms {
  Tensor adv_s;  // scalar zero when adversarial disabled
  Tensor task;
  Tensor diff;  // scalar zero when the difference term is disabled
  Tensor total;
};

struct LossSwitches {
  bool adversarial = true;
  bool difference = true;
  bool diff_includes_memory = false;
  bool diff_all_groups = false;  // joint training: difference term per group
};

BatchLossTerms acl_batch_losses(Graph& g, const AclModel& model, const JointBatch& batch,
                                std::size_t current_task, const Lambdas& lambdas,
                                const LossSwitches& switches);

}  // namespace acl
