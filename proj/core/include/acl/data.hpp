#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "acl/tensor.hpp"

namespace acl {

/// Decoded IDX file: u8 payload plus dimension extents.
struct IdxData {
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> bytes;
};

/// Parses an IDX file (magic 0x00000801 for labels, 0x00000803 for images).
/// Accepts gzip-compressed files transparently.
IdxData load_idx(const std::filesystem::path& path);

/// MNIST train/test pairs with pixels scaled to [0,1] in 1/255 steps.
struct RawMnist {
  std::size_t image_rows = 0, image_cols = 0;
  std::shared_ptr<const std::vector<float>> train_x;  // n×784 row-major
  std::vector<std::uint8_t> train_y;
  std::shared_ptr<const std::vector<float>> test_x;
  std::vector<std::uint8_t> test_y;

  std::size_t input_dim() const { return image_rows * image_cols; }
  std::size_t train_size() const { return train_y.size(); }
  std::size_t test_size() const { return test_y.size(); }
};

/// Loads the four standard MNIST files ("train-images-idx3-ubyte" etc.,
/// optionally with a .gz suffix) from dir.
RawMnist load_mnist(const std::filesystem::path& dir);

/// Resolves the dataset directory: explicit argument, else ACL_DATA_DIR.
std::optional<std::filesystem::path> resolve_data_dir(const std::string& explicit_dir);

/// Immutable view over one split of a task: a shared float base, per-sample
/// base rows, an optional pixel permutation, and within-task labels.
class SampleStore {
 public:
  SampleStore() = default;
  SampleStore(std::shared_ptr<const std::vector<float>> base, std::size_t base_dim,
              std::vector<std::uint32_t> rows, std::vector<std::uint16_t> labels,
              std::vector<std::uint32_t> pixel_perm = {});

  std::size_t size() const { return rows_.size(); }
  std::size_t input_dim() const;
  std::size_t label(std::size_t i) const { return labels_.at(i); }
  /// Index of the sample in the backing array (for disjointness checks).
  std::size_t base_row(std::size_t i) const { return rows_.at(i); }
  bool has_permutation() const { return !perm_.empty(); }
  std::span<const std::uint32_t> permutation() const { return perm_; }

  void fill_row(std::size_t i, std::span<double> out) const;
  /// Rows [which] as an n×d leaf tensor (whole store when empty).
  Tensor materialize(std::span<const std::size_t> which) const;
  Tensor materialize_all() const;

 private:
  std::shared_ptr<const std::vector<float>> base_;
  std::size_t base_dim_ = 0;
  std::vector<std::uint32_t> rows_;
  std::vector<std::uint16_t> labels_;
  std::vector<std::uint32_t> perm_;  // empty = identity
};

/// Labeled samples of one task: within-task classes, constant task label.
struct TaskDataset {
  std::size_t t = 1;  // 1-based task label
  std::size_t num_classes = 2;
  std::size_t input_dim = 0;
  std::vector<std::size_t> original_classes;  // within-task index -> source class
  SampleStore train, valid, test;
};

/// 5-Split-MNIST-style tasks from disjoint digit pairs; within-task labels
/// are {0,1}; the train/valid partition is a pure function of the seed.
std::vector<TaskDataset> make_split_tasks(
    const RawMnist& raw,
    const std::vector<std::pair<int, int>>& pairs = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}},
    double valid_fraction = 0.15, std::uint64_t seed = 1);

/// Permuted-MNIST tasks: task 1 is the identity permutation, tasks 2..T get
/// independent fixed pixel permutations; labels are the 10 digits.
/// train_fraction < 1 downsamples the train split (desk-scale runs).
std::vector<TaskDataset> make_permuted_tasks(const RawMnist& raw, std::size_t T,
                                             std::uint64_t seed,
                                             double valid_fraction = 0.15,
                                             double train_fraction = 1.0);

/// Gaussian-cluster tasks (unit covariance, means of norm 3); linearly
/// separable with high probability. Fast substrate for property tests.
std::vector<TaskDataset> make_synthetic_tasks(std::size_t T, std::size_t C,
                                              std::size_t input_dim,
                                              std::size_t n_per_class, std::uint64_t seed);

}  // namespace acl
