#pragma once

// Seedable, splittable random streams. A stream is identified by a root seed
// and a name, so independent consumers (batch draws, output selection,
// instance generation) never share state.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "lrsdp/errors.hpp"

namespace lrsdp {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : root_(detail::splitmix64(seed)), engine_(root_) {}

  /// Independent child stream keyed by name.
  Rng split(std::string_view name) const {
    return Rng(detail::splitmix64(root_ ^ detail::fnv1a(name)), Tag{});
  }
  static Rng stream(std::uint64_t seed, std::string_view name) {
    return Rng(seed).split(name);
  }

  std::mt19937_64& engine() { return engine_; }

  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  /// b distinct indices drawn uniformly from [0, n), returned sorted.
  /// b == n returns every index and consumes no randomness.
  std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n, Eigen::Index b) {
    detail::require(b >= 1 && b <= n, "sample_without_replacement: need 1 <= b <= n");
    std::vector<Eigen::Index> out;
    out.reserve(static_cast<std::size_t>(b));
    if (b == n) {
      for (Eigen::Index i = 0; i < n; ++i) out.push_back(i);
      return out;
    }
    if (b == 1) {
      out.push_back(static_cast<Eigen::Index>(uniform_int(0, n - 1)));
      return out;
    }
    // Floyd's algorithm.
    std::unordered_set<Eigen::Index> chosen;
    for (Eigen::Index j = n - b; j < n; ++j) {
      const auto t = static_cast<Eigen::Index>(uniform_int(0, j));
      if (chosen.insert(t).second) {
        out.push_back(t);
      } else {
        chosen.insert(j);
        out.push_back(j);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Tag {};
  Rng(std::uint64_t state, Tag) : root_(state), engine_(state) {}

  std::uint64_t root_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace lrsdp
