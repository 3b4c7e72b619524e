#include "acl/model.hpp"

#include <string>

#include "acl/errors.hpp"
#include "acl/serialize.hpp"

namespace acl {

std::size_t AclConfig::head_input_dim() const {
  return (use_private ? latent_dim_p : 0) + (use_shared ? latent_dim_s : 0);
}

void AclConfig::validate() const {
  if (input_dim == 0) throw ConfigError("model.input_dim must be positive");
  if (latent_dim_s == 0) throw ConfigError("model.latent_dim_s must be positive");
  if (latent_dim_p == 0) throw ConfigError("model.latent_dim_p must be positive");
  if (classes_per_task < 2) throw ConfigError("model.classes_per_task must be >= 2");
  if (max_tasks < 1) throw ConfigError("model.max_tasks must be >= 1");
  for (auto d : shared_hidden)
    if (d == 0) throw ConfigError("model.shared_hidden dims must be positive");
  for (auto d : private_hidden)
    if (d == 0) throw ConfigError("model.private_hidden dims must be positive");
  for (auto d : head_hidden)
    if (d == 0) throw ConfigError("model.head_hidden dims must be positive");
  for (auto d : discriminator_hidden)
    if (d == 0) throw ConfigError("model.discriminator_hidden dims must be positive");
  if (lambda_adv < 0 || lambda_task < 0 || lambda_diff < 0)
    throw ConfigError("model.lambda_* must be non-negative");
  if (noise_stddev < 0) throw ConfigError("model.noise_stddev must be non-negative");
  if (!use_shared && !use_private)
    throw ConfigError("model: at least one of use_shared/use_private required");
  if (use_discriminator && !use_shared)
    throw ConfigError("model.use_discriminator requires use_shared");
}

void to_json(nlohmann::json& j, const AclConfig& c) {
  j = nlohmann::json{{"input_dim", c.input_dim},
                     {"shared_hidden", c.shared_hidden},
                     {"latent_dim_s", c.latent_dim_s},
                     {"latent_dim_p", c.latent_dim_p},
                     {"private_hidden", c.private_hidden},
                     {"head_hidden", c.head_hidden},
                     {"classes_per_task", c.classes_per_task},
                     {"max_tasks", c.max_tasks},
                     {"discriminator_hidden", c.discriminator_hidden},
                     {"lambda_adv", c.lambda_adv},
                     {"lambda_task", c.lambda_task},
                     {"lambda_diff", c.lambda_diff},
                     {"noise_mean", c.noise_mean},
                     {"noise_stddev", c.noise_stddev},
                     {"use_shared", c.use_shared},
                     {"use_private", c.use_private},
                     {"use_discriminator", c.use_discriminator}};
}

void from_json(const nlohmann::json& j, AclConfig& c) {
  AclConfig d;
  c.input_dim = j.value("input_dim", d.input_dim);
  c.shared_hidden = j.value("shared_hidden", d.shared_hidden);
  c.latent_dim_s = j.value("latent_dim_s", d.latent_dim_s);
  c.latent_dim_p = j.value("latent_dim_p", d.latent_dim_p);
  c.private_hidden = j.value("private_hidden", d.private_hidden);
  c.head_hidden = j.value("head_hidden", d.head_hidden);
  c.classes_per_task = j.value("classes_per_task", d.classes_per_task);
  c.max_tasks = j.value("max_tasks", d.max_tasks);
  c.discriminator_hidden = j.value("discriminator_hidden", d.discriminator_hidden);
  c.lambda_adv = j.value("lambda_adv", d.lambda_adv);
  c.lambda_task = j.value("lambda_task", d.lambda_task);
  c.lambda_diff = j.value("lambda_diff", d.lambda_diff);
  c.noise_mean = j.value("noise_mean", d.noise_mean);
  c.noise_stddev = j.value("noise_stddev", d.noise_stddev);
  c.use_shared = j.value("use_shared", d.use_shared);
  c.use_private = j.value("use_private", d.use_private);
  c.use_discriminator = j.value("use_discriminator", d.use_discriminator);
}

namespace {
std::vector<std::size_t> chain_dims(std::size_t in, const std::vector<std::size_t>& hidden,
                                    std::size_t out) {
  std::vector<std::size_t> dims;
  dims.push_back(in);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}
}  // namespace

Mlp AclModel::make_private(std::uint64_t seed) const {
  return Mlp(chain_dims(config_.input_dim, config_.private_hidden, config_.latent_dim_p),
             /*terminal_relu=*/true, seed);
}

Mlp AclModel::make_head(std::uint64_t seed) const {
  return Mlp(chain_dims(config_.head_input_dim(), config_.head_hidden,
                        config_.classes_per_task),
             /*terminal_relu=*/false, seed);
}

AclModel AclModel::build(const AclConfig& config, std::uint64_t seed) {
  config.validate();
  AclModel m;
  m.config_ = config;
  if (config.use_shared) {
    m.shared_ = Mlp(chain_dims(config.input_dim, config.shared_hidden, config.latent_dim_s),
                    /*terminal_relu=*/false, Rng::mix(seed, 1));
  }
  if (config.use_discriminator) {
    m.discriminator_ =
        Mlp(chain_dims(config.latent_dim_s, config.discriminator_hidden,
                       config.max_tasks + 1),
            /*terminal_relu=*/false, Rng::mix(seed, 2));
  }
  if (config.use_private) m.privates_.push_back(m.make_private(Rng::mix(seed, 3)));
  m.heads_.push_back(m.make_head(Rng::mix(seed, 4)));
  return m;
}

void AclModel::grow(std::uint64_t seed) {
  if (seen_tasks() >= config_.max_tasks) {
    throw CapacityError("grow: already at max_tasks=" + std::to_string(config_.max_tasks));
  }
  if (!privates_.empty()) privates_.back().set_trainable(false);
  heads_.back().set_trainable(false);
  if (config_.use_private) privates_.push_back(make_private(Rng::mix(seed, 5)));
  heads_.push_back(make_head(Rng::mix(seed, 6)));
}

Tensor AclModel::forward_shared(Graph& g, const Tensor& x) const {
  if (!has_shared()) throw ContractError("forward_shared: model has no shared module");
  return shared_.forward(g, x);
}

Tensor AclModel::forward_private(Graph& g, const Tensor& x, std::size_t task) const {
  if (!privates_used()) throw ContractError("forward_private: model has no private modules");
  if (task < 1 || task > privates_.size()) {
    throw ContractError("forward_private: task " + std::to_string(task) +
                        " out of range [1," + std::to_string(privates_.size()) + "]");
  }
  return privates_[task - 1].forward(g, x);
}

Tensor AclModel::forward_head(Graph& g, const Tensor& z, std::size_t task) const {
  if (task < 1 || task > heads_.size()) {
    throw ContractError("forward_head: task " + std::to_string(task) + " out of range [1," +
                        std::to_string(heads_.size()) + "]");
  }
  return heads_[task - 1].forward(g, z);
}

Tensor AclModel::forward_task(Graph& g, const Tensor& x, std::size_t task) const {
  if (task < 1 || task > seen_tasks()) {
    throw ContractError("forward_task: task " + std::to_string(task) + " out of range [1," +
                        std::to_string(seen_tasks()) + "]");
  }
  if (x.rank() != 2 || x.cols() != config_.input_dim) {
    throw DimensionError("forward_task: input " + shape_str(x.shape()) + " does not match input_dim=" +
                         std::to_string(config_.input_dim));
  }
  Tensor z;
  if (privates_used() && has_shared()) {
    // z_P occupies the leading columns, z_S the trailing ones.
    z = concat_cols(g, forward_private(g, x, task), forward_shared(g, x));
  } else if (privates_used()) {
    z = forward_private(g, x, task);
  } else {
    z = forward_shared(g, x);
  }
  return forward_head(g, z, task);
}

Tensor AclModel::forward_discriminator(Graph& g, const Tensor& z) const {
  if (!has_discriminator())
    throw ContractError("forward_discriminator: model has no discriminator");
  if (z.rank() != 2 || z.cols() != config_.latent_dim_s) {
    throw DimensionError("forward_discriminator: features " + shape_str(z.shape()) +
                         " do not match latent_dim_s=" + std::to_string(config_.latent_dim_s));
  }
  return discriminator_.forward(g, z);
}

std::vector<Tensor> AclModel::shared_params() const {
  return has_shared() ? shared_.params() : std::vector<Tensor>{};
}

std::vector<Tensor> AclModel::discriminator_params() const {
  return has_discriminator() ? discriminator_.params() : std::vector<Tensor>{};
}

std::vector<Tensor> AclModel::current_task_params() const {
  std::vector<Tensor> out;
  if (privates_used() && !privates_.empty()) {
    for (auto& p : privates_.back().params()) out.push_back(p);
  }
  for (auto& p : heads_.back().params()) out.push_back(p);
  return out;
}

std::vector<Tensor> AclModel::all_params() const {
  std::vector<Tensor> out = shared_params();
  for (const auto& m : privates_) {
    for (auto& p : m.params()) out.push_back(p);
  }
  for (const auto& m : heads_) {
    for (auto& p : m.params()) out.push_back(p);
  }
  for (auto& p : discriminator_params()) out.push_back(p);
  return out;
}

std::size_t AclModel::param_count() const {
  std::size_t n = shared_param_count() + discriminator_param_count();
  for (const auto& m : privates_) n += m.param_count();
  for (const auto& m : heads_) n += m.param_count();
  return n;
}

std::size_t AclModel::per_task_param_count() const {
  std::size_t n = heads_.back().param_count();
  if (privates_used() && !privates_.empty()) n += privates_.back().param_count();
  return n;
}

void AclModel::freeze_shared() {
  if (has_shared()) shared_.set_trainable(false);
}

bool AclModel::shared_frozen() const { return has_shared() && !shared_.trainable(); }

namespace {

void append_mlp_blocks(std::vector<ContainerBlock>& blocks, const Mlp& mlp,
                       const std::string& prefix) {
  for (std::size_t i = 0; i < mlp.num_layers(); ++i) {
    const auto& l = mlp.layer(i);
    const std::string base = prefix + ".l" + std::to_string(i);
    blocks.push_back({base + ".weight", l.weight().shape(),
                      {l.weight().values().begin(), l.weight().values().end()}});
    blocks.push_back({base + ".bias", l.bias().shape(),
                      {l.bias().values().begin(), l.bias().values().end()}});
  }
}

void read_mlp_blocks(const Container& c, std::size_t& cursor, Mlp& mlp,
                     const std::string& prefix) {
  for (std::size_t i = 0; i < mlp.num_layers(); ++i) {
    auto& l = mlp.layer(i);
    const std::string base = prefix + ".l" + std::to_string(i);
    for (Tensor* t : {&l.weight(), &l.bias()}) {
      if (cursor >= c.blocks.size()) throw FormatError("model load: missing block " + base);
      const auto& b = c.blocks[cursor++];
      if (b.shape != t->shape()) {
        throw FormatError("model load: block '" + b.name + "' shape mismatch");
      }
      auto v = t->values_mut();
      std::copy(b.values.begin(), b.values.end(), v.begin());
    }
  }
}

}  // namespace

void AclModel::save(const std::filesystem::path& path) const {
  nlohmann::json meta;
  meta["config"] = config_;
  meta["seen_tasks"] = seen_tasks();
  std::vector<ContainerBlock> blocks;
  if (has_shared()) append_mlp_blocks(blocks, shared_, "shared");
  for (std::size_t i = 0; i < privates_.size(); ++i)
    append_mlp_blocks(blocks, privates_[i], "private" + std::to_string(i + 1));
  for (std::size_t i = 0; i < heads_.size(); ++i)
    append_mlp_blocks(blocks, heads_[i], "head" + std::to_string(i + 1));
  if (has_discriminator()) append_mlp_blocks(blocks, discriminator_, "discriminator");
  write_container(path, "model", meta, blocks);
}

AclModel AclModel::load(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.kind != "model") throw FormatError("model load: container kind '" + c.kind + "'");
  AclConfig cfg = c.meta.at("config").get<AclConfig>();
  const std::size_t seen = c.meta.at("seen_tasks").get<std::size_t>();
  AclModel m = build(cfg, /*seed=*/0);
  for (std::size_t k = 1; k < seen; ++k) m.grow(/*seed=*/0);
  std::size_t cursor = 0;
  if (m.has_shared()) read_mlp_blocks(c, cursor, m.shared_, "shared");
  for (std::size_t i = 0; i < m.privates_.size(); ++i)
    read_mlp_blocks(c, cursor, m.privates_[i], "private" + std::to_string(i + 1));
  for (std::size_t i = 0; i < m.heads_.size(); ++i)
    read_mlp_blocks(c, cursor, m.heads_[i], "head" + std::to_string(i + 1));
  if (m.has_discriminator()) read_mlp_blocks(c, cursor, m.discriminator_, "discriminator");
  if (cursor != c.blocks.size()) throw FormatError("model load: extra parameter blocks");
  return m;
}

}  // namespace acl
