#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace acl {

/// Deterministic pseudo-random source built on splitmix64.
///
/// Every distribution is implemented in-house so that streams are
/// bit-reproducible across compilers and standard libraries; the std::
/// distributions make no such guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal via the Marsaglia polar method (spare cached).
  double normal();

  double normal(double mean, double stddev);

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  /// k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  /// Derives an independent stream seed from a parent seed and a tag.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t tag);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace acl
