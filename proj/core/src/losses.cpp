#include "acl/losses.hpp"

#include <string>

#include "acl/errors.hpp"

namespace acl {

void JointBatch::validate() const {
  const std::size_t n = y.size();
  if (n == 0) throw ContractError("JointBatch: empty batch");
  if (!x.defined() || x.rank() != 2 || x.rows() != n)
    throw ContractError("JointBatch: x rows do not match label count");
  if (t.size() != n || (!from_memory.empty() && from_memory.size() != n))
    throw ContractError("JointBatch: ragged fields");
  for (auto tv : t) {
    if (tv == 0) throw ContractError("JointBatch: task label 0 is reserved for fake noise");
  }
}

std::map<std::size_t, std::vector<std::size_t>> rows_by_task(const JointBatch& batch) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.t.size(); ++i) groups[batch.t[i]].push_back(i);
  return groups;
}

namespace {

void check_task_range(const AclModel& model, std::size_t task, const char* where) {
  if (task < 1 || task > model.seen_tasks()) {
    throw ContractError(std::string(where) + ": task " + std::to_string(task) +
                        " out of range [1," + std::to_string(model.seen_tasks()) + "]");
  }
}

void check_labels(const AclModel& model, const JointBatch& batch, const char* where) {
  const std::size_t c = model.config().classes_per_task;
  for (auto yv : batch.y) {
    if (yv >= c) {
      throw ContractError(std::string(where) + ": class label " + std::to_string(yv) +
                          " out of range [0," + std::to_string(c) + ")");
    }
  }
  for (auto tv : batch.t) check_task_range(model, tv, where);
}

Tensor head_logits_for_group(Graph& g, const AclModel& model, const Tensor& x_g,
                             const Tensor& zs_g, std::size_t task) {
  Tensor z;
  if (model.privates_used() && model.has_shared()) {
    z = concat_cols(g, model.forward_private(g, x_g, task), zs_g);
  } else if (model.privates_used()) {
    z = model.forward_private(g, x_g, task);
  } else {
    z = zs_g;
  }
  return model.forward_head(g, z, task);
}

Tensor frobenius_sq(Graph& g, const Tensor& zs, const Tensor& zp) {
  Tensor m = matmul(g, transpose(g, zs), zp);
  return sum(g, mul(g, m, m));
}

}  // namespace

Tensor task_loss(Graph& g, const AclModel& model, const JointBatch& batch) {
  batch.validate();
  check_labels(model, batch, "task_loss");
  const auto groups = rows_by_task(batch);
  Tensor acc;
  for (const auto& [task, rows] : groups) {
    Tensor x_g = gather_rows(batch.x, rows);
    std::vector<std::size_t> y_g;
    y_g.reserve(rows.size());
    for (auto i : rows) y_g.push_back(batch.y[i]);
    Tensor zs_g;
    if (model.has_shared()) zs_g = model.forward_shared(g, x_g);
    Tensor logits = head_logits_for_group(g, model, x_g, zs_g, task);
    Tensor ce = softmax_cross_entropy_sum(g, logits, y_g);
    acc = acc.defined() ? add(g, acc, ce) : ce;
  }
  return scale(g, acc, 1.0 / static_cast<double>(batch.size()));
}

Tensor adv_loss_for_s(Graph& g, const AclModel& model, const JointBatch& batch) {
  batch.validate();
  check_labels(model, batch, "adv_loss_for_s");
  if (!model.has_shared() || !model.has_discriminator())
    throw ContractError("adv_loss_for_s: model lacks shared module or discriminator");
  Tensor zs = model.forward_shared(g, batch.x);
  Tensor logits = model.forward_discriminator(g, gradient_reversal(g, zs));
  return softmax_cross_entropy(g, logits, batch.t);
}

Tensor adv_loss_for_d(Graph& g, const AclModel& model, const JointBatch& batch,
                      std::size_t noise_n, Rng& rng) {
  batch.validate();
  check_labels(model, batch, "adv_loss_for_d");
  if (!model.has_shared() || !model.has_discriminator())
    throw ContractError("adv_loss_for_d: model lacks shared module or discriminator");
  // Shared features are computed on a scratch tape: structurally detached.
  Tensor real;
  {
    Graph scratch;
    real = model.forward_shared(scratch, batch.x).detached();
  }
  const std::size_t d = model.config().latent_dim_s;
  std::vector<std::size_t> labels(batch.t.begin(), batch.t.end());
  Tensor features = real;
  if (noise_n > 0) {
    std::vector<double> noise(noise_n * d);
    for (auto& v : noise)
      v = rng.normal(model.config().noise_mean, model.config().noise_stddev);
    features = vstack_data(real, Tensor::from_values({noise_n, d}, std::move(noise)));
    labels.insert(labels.end(), noise_n, 0);
  }
  Tensor logits = model.forward_discriminator(g, features);
  return softmax_cross_entropy(g, logits, labels);
}

Tensor diff_loss(Graph& g, const AclModel& model, const Tensor& x, std::size_t task) {
  if (!model.has_shared() || !model.privates_used())
    throw ContractError("diff_loss: needs both shared and private modules");
  check_task_range(model, task, "diff_loss");
  Tensor zs = model.forward_shared(g, x);
  Tensor zp = model.forward_private(g, x, task);
  return frobenius_sq(g, zs, zp);
}

Tensor diff_loss_with_memory(Graph& g, const AclModel& model, const JointBatch& batch,
                             std::size_t current_task) {
  batch.validate();
  check_labels(model, batch, "diff_loss_with_memory");
  check_task_range(model, current_task, "diff_loss_with_memory");
  Tensor acc;
  for (const auto& [task, rows] : rows_by_task(batch)) {
    Tensor x_g = gather_rows(batch.x, rows);
    Tensor term = diff_loss(g, model, x_g, task);
    acc = acc.defined() ? add(g, acc, term) : term;
  }
  return acc;
}

Tensor total_loss(Graph& g, const Lambdas& lambdas, const Tensor& l_adv,
                  const Tensor& l_task, const Tensor& l_diff) {
  if (lambdas.adv < 0 || lambdas.task < 0 || lambdas.diff < 0)
    throw ContractError("total_loss: lambda components must be non-negative");
  Tensor total = add(g, scale(g, l_adv, lambdas.adv), scale(g, l_task, lambdas.task));
  return add(g, total, scale(g, l_diff, lambdas.diff));
}

BatchLossTerms acl_batch_losses(Graph& g, const AclModel& model, const JointBatch& batch,
                                std::size_t current_task, const Lambdas& lambdas,
                                const LossSwitches& switches) {
  batch.validate();
  check_labels(model, batch, "acl_batch_losses");
  check_task_range(model, current_task, "acl_batch_losses");
  const bool adv = switches.adversarial && model.has_discriminator() && model.has_shared();
  const bool diff = switches.difference && model.has_shared() && model.privates_used();

  Tensor task_acc, adv_acc, diff_acc;
  for (const auto& [task, rows] : rows_by_task(batch)) {
    Tensor x_g = gather_rows(batch.x, rows);
    std::vector<std::size_t> y_g, t_g;
    y_g.reserve(rows.size());
    t_g.assign(rows.size(), task);
    for (auto i : rows) y_g.push_back(batch.y[i]);

    Tensor zs_g;
    if (model.has_shared()) zs_g = model.forward_shared(g, x_g);

    Tensor zp_g;
    if (model.privates_used()) zp_g = model.forward_private(g, x_g, task);

    Tensor z;
    if (zp_g.defined() && zs_g.defined()) {
      z = concat_cols(g, zp_g, zs_g);
    } else {
      z = zp_g.defined() ? zp_g : zs_g;
    }
    Tensor ce = softmax_cross_entropy_sum(g, model.forward_head(g, z, task), y_g);
    task_acc = task_acc.defined() ? add(g, task_acc, ce) : ce;

    if (adv) {
      Tensor dlogits = model.forward_discriminator(g, gradient_reversal(g, zs_g));
      Tensor a = softmax_cross_entropy_sum(g, dlogits, t_g);
      adv_acc = adv_acc.defined() ? add(g, adv_acc, a) : a;
    }
    if (diff && (task == current_task || switches.diff_includes_memory ||
                 switches.diff_all_groups)) {
      Tensor term = frobenius_sq(g, zs_g, zp_g);
      diff_acc = diff_acc.defined() ? add(g, diff_acc, term) : term;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  BatchLossTerms terms;
  terms.task = scale(g, task_acc, inv_n);
  terms.adv_s = adv_acc.defined() ? scale(g, adv_acc, inv_n) : Tensor::scalar(0.0);
  terms.diff = diff_acc.defined() ? diff_acc : Tensor::scalar(0.0);
  terms.total = total_loss(g, lambdas, terms.adv_s, terms.task, terms.diff);
  return terms;
}

}  // namespace acl
