#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdebnn/random.hpp"

namespace sdebnn {

/// Identifies one Brownian sample path. Paths with equal keys are identical;
/// distinct path_id values give independent paths.
struct SeedKey {
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;

  friend bool operator==(const SeedKey&, const SeedKey&) = default;
};

/// Virtual Brownian tree on [0, 1].
///
/// B(1) is drawn first, then every dyadic midpoint is drawn from the Brownian
/// bridge between its two parents. The normal variates of a tree node are a
/// pure function of (seed, path_id, node index), so any set of query times can
/// be answered again later without storing the path. Times that are not
/// dyadic rationals with denominator <= 2^kMaxDepth are resolved by a final
/// bridge draw inside the depth-kMaxDepth leaf that contains them.
///
/// Immutable after construction; safe to query concurrently.
class BrownianPath {
 public:
  static constexpr int kMaxDepth = 24;

  BrownianPath(SeedKey key, std::size_t dimension);

  const SeedKey& key() const noexcept { return key_; }
  std::size_t dimension() const noexcept { return dimension_; }

  /// B_t, with B_0 = 0.
  std::vector<double> value(double t) const;

  /// B at every requested time (any order, duplicates allowed). Shares the
  /// tree descent between queries, so a grid of n dyadic points costs O(n).
  std::vector<std::vector<double>> values(std::span<const double> times) const;

  /// B_{t1} - B_{t0}. Requires 0 <= t0 <= t1 <= 1.
  std::vector<double> increment(double t0, double t1) const;

  /// Increments over consecutive grid points: result[i] = B(grid[i+1]) - B(grid[i]).
  std::vector<std::vector<double>> increments(std::span<const double> grid) const;

  /// B_{t_mid} - B_{t0}, i.e. the left half of a subdivided interval. The
  /// value is distributed as the Brownian bridge conditional on the
  /// increment over [t0, t1]. Requires t0 < t_mid < t1.
  std::vector<double> subdivide(double t0, double t1, double t_mid) const;

 private:
  struct Query;
  void descend(std::uint64_t node, int depth, double a, double b, const std::vector<double>& ba,
               const std::vector<double>& bb, std::span<Query> queries,
               std::vector<std::vector<double>>& out) const;
  void draw(std::uint64_t node, std::uint64_t tag, std::vector<double>& z) const;

  SeedKey key_;
  std::size_t dimension_;
  rng::CounterStream stream_;
};

}  // namespace sdebnn
