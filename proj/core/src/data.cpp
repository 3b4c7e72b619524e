#include "acl/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdlib>
#include <set>

#include "acl/errors.hpp"
#include "acl/rng.hpp"

namespace acl {

namespace {

constexpr std::uint32_t kLabelMagic = 0x00000801;
constexpr std::uint32_t kImageMagic = 0x00000803;

std::vector<std::uint8_t> read_maybe_gz(const std::filesystem::path& path) {
  // gzread passes plain files through unchanged, so one path handles both.
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw DataError("load_idx: cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) out.insert(out.end(), buf, buf + n);
  const bool bad = n < 0;
  gzclose(f);
  if (bad) throw FormatError("load_idx: decompression failed for " + path.string());
  return out;
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

}  // namespace

IdxData load_idx(const std::filesystem::path& path) {
  const auto bytes = read_maybe_gz(path);
  if (bytes.size() < 4) throw FormatError("load_idx: file too short: " + path.string());
  const std::uint32_t magic = be32(bytes.data());
  std::size_t ndims;
  if (magic == kLabelMagic) {
    ndims = 1;
  } else if (magic == kImageMagic) {
    ndims = 3;
  } else {
    char hex[16];
    std::snprintf(hex, sizeof(hex), "0x%08x", magic);
    throw FormatError("load_idx: unexpected magic " + std::string(hex) + " in " +
                      path.string());
  }
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() < header)
    throw FormatError("load_idx: truncated header in " + path.string());
  IdxData out;
  std::size_t numel = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    const std::size_t d = be32(bytes.data() + 4 + 4 * i);
    out.dims.push_back(d);
    numel *= d;
  }
  if (bytes.size() != header + numel) {
    throw FormatError("load_idx: length mismatch in " + path.string() + ": expected " +
                      std::to_string(header + numel) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  out.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

namespace {

std::filesystem::path find_variant(const std::filesystem::path& dir, const std::string& name) {
  for (const auto& candidate : {dir / name, dir / (name + ".gz")}) {
    if (std::filesystem::exists(candidate)) return candidate;
  }
  throw DataError("load_mnist: missing " + (dir / name).string() + "[.gz]");
}

std::shared_ptr<const std::vector<float>> normalize_pixels(const std::vector<std::uint8_t>& b) {
  auto out = std::make_shared<std::vector<float>>(b.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    (*out)[i] = static_cast<float>(b[i]) / 255.0f;
  return out;
}

}  // namespace

RawMnist load_mnist(const std::filesystem::path& dir) {
  IdxData train_images = load_idx(find_variant(dir, "train-images-idx3-ubyte"));
  IdxData train_labels = load_idx(find_variant(dir, "train-labels-idx1-ubyte"));
  IdxData test_images = load_idx(find_variant(dir, "t10k-images-idx3-ubyte"));
  IdxData test_labels = load_idx(find_variant(dir, "t10k-labels-idx1-ubyte"));
  if (train_images.dims[0] != train_labels.dims[0] ||
      test_images.dims[0] != test_labels.dims[0]) {
    throw DataError("load_mnist: image/label counts disagree");
  }
  RawMnist raw;
  raw.image_rows = train_images.dims[1];
  raw.image_cols = train_images.dims[2];
  raw.train_x = normalize_pixels(train_images.bytes);
  raw.train_y = std::move(train_labels.bytes);
  raw.test_x = normalize_pixels(test_images.bytes);
  raw.test_y = std::move(test_labels.bytes);
  return raw;
}

std::optional<std::filesystem::path> resolve_data_dir(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return std::filesystem::path(explicit_dir);
  if (const char* env = std::getenv("ACL_DATA_DIR"); env && *env) {
    return std::filesystem::path(env);
  }
  return std::nullopt;
}

SampleStore::SampleStore(std::shared_ptr<const std::vector<float>> base,
                         std::size_t base_dim, std::vector<std::uint32_t> rows,
                         std::vector<std::uint16_t> labels,
                         std::vector<std::uint32_t> pixel_perm)
    : base_(std::move(base)),
      base_dim_(base_dim),
      rows_(std::move(rows)),
      labels_(std::move(labels)),
      perm_(std::move(pixel_perm)) {
  if (rows_.size() != labels_.size())
    throw DataError("SampleStore: rows/labels size mismatch");
  if (!perm_.empty() && perm_.size() != base_dim_)
    throw DataError("SampleStore: permutation length does not match input_dim");
}

std::size_t SampleStore::input_dim() const { return base_dim_; }

void SampleStore::fill_row(std::size_t i, std::span<double> out) const {
  const float* src = base_->data() + static_cast<std::size_t>(rows_.at(i)) * base_dim_;
  if (perm_.empty()) {
    for (std::size_t j = 0; j < base_dim_; ++j) out[j] = static_cast<double>(src[j]);
  } else {
    for (std::size_t j = 0; j < base_dim_; ++j)
      out[j] = static_cast<double>(src[perm_[j]]);
  }
}

Tensor SampleStore::materialize(std::span<const std::size_t> which) const {
  std::vector<double> data(which.size() * base_dim_);
  for (std::size_t i = 0; i < which.size(); ++i) {
    fill_row(which[i], std::span<double>(data.data() + i * base_dim_, base_dim_));
  }
  return Tensor::from_values({which.size(), base_dim_}, std::move(data));
}

Tensor SampleStore::materialize_all() const {
  std::vector<std::size_t> idx(size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return materialize(idx);
}

std::vector<TaskDataset> make_split_tasks(const RawMnist& raw,
                                          const std::vector<std::pair<int, int>>& pairs,
                                          double valid_fraction, std::uint64_t seed) {
  std::set<int> used;
  for (const auto& [a, b] : pairs) {
    for (int c : {a, b}) {
      if (!used.insert(c).second) {
        throw ConfigError("make_split_tasks: class " + std::to_string(c) +
                          " appears in more than one pair");
      }
    }
  }
  if (valid_fraction < 0.0 || valid_fraction >= 1.0)
    throw ConfigError("make_split_tasks: valid_fraction must be in [0,1)");

  const std::size_t d = raw.input_dim();
  std::vector<TaskDataset> tasks;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [a, b] = pairs[k];
    TaskDataset ds;
    ds.t = k + 1;
    ds.num_classes = 2;
    ds.input_dim = d;
    ds.original_classes = {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};

    std::vector<std::uint32_t> rows;
    std::vector<std::uint16_t> labels;
    for (std::size_t i = 0; i < raw.train_size(); ++i) {
      if (raw.train_y[i] == a || raw.train_y[i] == b) {
        rows.push_back(static_cast<std::uint32_t>(i));
        labels.push_back(raw.train_y[i] == a ? 0 : 1);
      }
    }
    // Deterministic partition: shuffle positions, first slice is validation.
    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(Rng::mix(seed, 0x5150 + k));
    rng.shuffle(order);
    const std::size_t n_valid =
        static_cast<std::size_t>(static_cast<double>(rows.size()) * valid_fraction);
    std::vector<std::uint32_t> train_rows, valid_rows;
    std::vector<std::uint16_t> train_labels, valid_labels;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i < n_valid) {
        valid_rows.push_back(rows[order[i]]);
        valid_labels.push_back(labels[order[i]]);
      } else {
        train_rows.push_back(rows[order[i]]);
        train_labels.push_back(labels[order[i]]);
      }
    }
    ds.train = SampleStore(raw.train_x, d, std::move(train_rows), std::move(train_labels));
    ds.valid = SampleStore(raw.train_x, d, std::move(valid_rows), std::move(valid_labels));

    std::vector<std::uint32_t> test_rows;
    std::vector<std::uint16_t> test_labels;
    for (std::size_t i = 0; i < raw.test_size(); ++i) {
      if (raw.test_y[i] == a || raw.test_y[i] == b) {
        test_rows.push_back(static_cast<std::uint32_t>(i));
        test_labels.push_back(raw.test_y[i] == a ? 0 : 1);
      }
    }
    ds.test = SampleStore(raw.test_x, d, std::move(test_rows), std::move(test_labels));
    tasks.push_back(std::move(ds));
  }
  return tasks;
}

std::vector<TaskDataset> make_permuted_tasks(const RawMnist& raw, std::size_t T,
                                             std::uint64_t seed, double valid_fraction,
                                             double train_fraction) {
  if (T < 1) throw ConfigError("make_permuted_tasks: T must be >= 1");
  if (train_fraction <= 0.0 || train_fraction > 1.0)
    throw ConfigError("make_permuted_tasks: train_fraction must be in (0,1]");
  const std::size_t d = raw.input_dim();

  // One train/valid partition shared by every task (tasks reuse the same
  // images under different pixel permutations).
  std::vector<std::size_t> order(raw.train_size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(Rng::mix(seed, 0x9e37));
  rng.shuffle(order);
  const std::size_t n_valid =
      static_cast<std::size_t>(static_cast<double>(order.size()) * valid_fraction);
  std::vector<std::uint32_t> valid_rows(order.begin(), order.begin() + n_valid);
  std::vector<std::uint32_t> train_rows(order.begin() + n_valid, order.end());
  const std::size_t n_train_keep =
      static_cast<std::size_t>(static_cast<double>(train_rows.size()) * train_fraction);
  train_rows.resize(std::max<std::size_t>(1, n_train_keep));

  auto labels_for = [&](const std::vector<std::uint32_t>& rows,
                        const std::vector<std::uint8_t>& y) {
    std::vector<std::uint16_t> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(y[r]);
    return out;
  };
  std::vector<std::uint32_t> test_rows(raw.test_size());
  for (std::size_t i = 0; i < test_rows.size(); ++i)
    test_rows[i] = static_cast<std::uint32_t>(i);

  std::vector<TaskDataset> tasks;
  for (std::size_t k = 1; k <= T; ++k) {
    std::vector<std::uint32_t> perm;  // task 1: identity
    if (k > 1) {
      perm.resize(d);
      for (std::size_t j = 0; j < d; ++j) perm[j] = static_cast<std::uint32_t>(j);
      Rng prng(Rng::mix(seed, 0xbeef00 + k));
      prng.shuffle(perm);
    }
    TaskDataset ds;
    ds.t = k;
    ds.num_classes = 10;
    ds.input_dim = d;
    ds.original_classes = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    ds.train = SampleStore(raw.train_x, d, train_rows, labels_for(train_rows, raw.train_y), perm);
    ds.valid = SampleStore(raw.train_x, d, valid_rows, labels_for(valid_rows, raw.train_y), perm);
    ds.test = SampleStore(raw.test_x, d, test_rows, labels_for(test_rows, raw.test_y), perm);
    tasks.push_back(std::move(ds));
  }
  return tasks;
}

std::vector<TaskDataset> make_synthetic_tasks(std::size_t T, std::size_t C,
                                              std::size_t input_dim,
                                              std::size_t n_per_class, std::uint64_t seed) {
  if (T < 1 || C < 1 || input_dim < 1 || n_per_class < 1)
    throw ConfigError("make_synthetic_tasks: all counts must be >= 1");

  std::vector<TaskDataset> tasks;
  for (std::size_t k = 1; k <= T; ++k) {
    Rng rng(Rng::mix(seed, 0xabc000 + k));
    // Class means: random directions scaled to norm 3.
    std::vector<std::vector<double>> means(C, std::vector<double>(input_dim));
    for (auto& mu : means) {
      double norm2 = 0.0;
      for (auto& v : mu) {
        v = rng.normal();
        norm2 += v * v;
      }
      const double s = 3.0 / std::sqrt(norm2);
      for (auto& v : mu) v *= s;
    }
    const std::size_t n_valid_per_class = std::max<std::size_t>(1, (n_per_class * 15) / 100);
    auto gen_split = [&](std::size_t per_class) {
      std::vector<float> base(per_class * C * input_dim);
      std::vector<std::uint16_t> labels(per_class * C);
      std::vector<std::uint32_t> rows(per_class * C);
      std::size_t r = 0;
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < per_class; ++i, ++r) {
          for (std::size_t j = 0; j < input_dim; ++j) {
            base[r * input_dim + j] = static_cast<float>(means[c][j] + rng.normal());
          }
          labels[r] = static_cast<std::uint16_t>(c);
          rows[r] = static_cast<std::uint32_t>(r);
        }
      }
      auto base_ptr = std::make_shared<const std::vector<float>>(std::move(base));
      return SampleStore(base_ptr, input_dim, std::move(rows), std::move(labels));
    };
    TaskDataset ds;
    ds.t = k;
    ds.num_classes = C;
    ds.input_dim = input_dim;
    for (std::size_t c = 0; c < C; ++c) ds.original_classes.push_back(c);
    ds.train = gen_split(n_per_class);
    ds.valid = gen_split(n_valid_per_class);
    ds.test = gen_split(n_per_class);
    tasks.push_back(std::move(ds));
  }
  return tasks;
}

}  // namespace acl
