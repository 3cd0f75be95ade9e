#include "sdebnn/brownian.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "sdebnn/errors.hpp"

namespace sdebnn {

namespace {

constexpr std::uint64_t kTreeTag = 0;
constexpr std::uint64_t kLeafTag = 1;

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError("Brownian query time " + std::to_string(t) + " outside [0, 1]");
  }
}

}  // namespace

struct BrownianPath::Query {
  double t;
  std::size_t slot;
};

BrownianPath::BrownianPath(SeedKey key, std::size_t dimension)
    : key_(key), dimension_(dimension), stream_(key.seed, key.path_id) {
  if (dimension == 0) throw ContractError("BrownianPath dimension must be positive");
}

void BrownianPath::draw(std::uint64_t node, std::uint64_t tag, std::vector<double>& z) const {
  z.resize(dimension_);
  // Counter layout: high word = (tag, node), low word = component pair.
  const std::uint64_t hi = rng::mix64(node ^ (tag << 62));
  for (std::size_t j = 0; j < dimension_; j += 2) {
    const auto n = stream_.normals(hi, j / 2);
    z[j] = n[0];
    if (j + 1 < dimension_) z[j + 1] = n[1];
  }
}

void BrownianPath::descend(std::uint64_t node, int depth, double a, double b,
                           const std::vector<double>& ba, const std::vector<double>& bb,
                           std::span<Query> queries, std::vector<std::vector<double>>& out) const {
  // Queries are sorted and lie in [a, b].
  std::size_t lo = 0;
  std::size_t hi = queries.size();
  while (lo < hi && queries[lo].t == a) out[queries[lo++].slot] = ba;
  while (hi > lo && queries[hi - 1].t == b) out[queries[--hi].slot] = bb;
  if (lo == hi) return;
  auto interior = queries.subspan(lo, hi - lo);

  std::vector<double> z;
  if (depth == kMaxDepth) {
    // Off-grid times: one bridge draw per time inside the finest leaf.
    for (const auto& q : interior) {
      const std::uint64_t tbits = std::bit_cast<std::uint64_t>(q.t);
      draw(rng::mix64(node) ^ tbits, kLeafTag, z);
      const double frac = (q.t - a) / (b - a);
      const double sd = std::sqrt((q.t - a) * (b - q.t) / (b - a));
      auto& v = out[q.slot];
      v.resize(dimension_);
      for (std::size_t j = 0; j < dimension_; ++j) v[j] = ba[j] + frac * (bb[j] - ba[j]) + sd * z[j];
    }
    return;
  }

  const double mid = 0.5 * (a + b);
  draw(node, kTreeTag, z);
  const double sd = 0.5 * std::sqrt(b - a);
  std::vector<double> bm(dimension_);
  for (std::size_t j = 0; j < dimension_; ++j) bm[j] = 0.5 * (ba[j] + bb[j]) + sd * z[j];

  auto split = std::partition_point(interior.begin(), interior.end(),
                                    [mid](const Query& q) { return q.t < mid; });
  auto left = interior.subspan(0, static_cast<std::size_t>(split - interior.begin()));
  auto right = interior.subspan(left.size());
  if (!left.empty()) descend(2 * node, depth + 1, a, mid, ba, bm, left, out);
  if (!right.empty()) descend(2 * node + 1, depth + 1, mid, b, bm, bb, right, out);
}

std::vector<std::vector<double>> BrownianPath::values(std::span<const double> times) const {
  std::vector<Query> queries;
  queries.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    check_time(times[i]);
    queries.push_back({times[i], i});
  }
  std::stable_sort(queries.begin(), queries.end(),
                   [](const Query& x, const Query& y) { return x.t < y.t; });

  std::vector<std::vector<double>> out(times.size());
  const std::vector<double> b0(dimension_, 0.0);
  std::vector<double> b1;
  draw(0, kTreeTag, b1);  // B(1) ~ N(0, I)
  descend(1, 0, 0.0, 1.0, b0, b1, queries, out);
  return out;
}

std::vector<double> BrownianPath::value(double t) const {
  const double ts[1] = {t};
  return std::move(values(ts)[0]);
}

std::vector<double> BrownianPath::increment(double t0, double t1) const {
  check_time(t0);
  check_time(t1);
  if (t1 < t0) throw DomainError("Brownian increment requires t0 <= t1");
  if (t0 == t1) return std::vector<double>(dimension_, 0.0);
  const double ts[2] = {t0, t1};
  auto v = values(ts);
  for (std::size_t j = 0; j < dimension_; ++j) v[1][j] -= v[0][j];
  return std::move(v[1]);
}

std::vector<std::vector<double>> BrownianPath::increments(std::span<const double> grid) const {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] < grid[i - 1]) throw DomainError("Brownian grid must be non-decreasing");
  }
  const auto v = values(grid);
  std::vector<std::vector<double>> inc(grid.empty() ? 0 : grid.size() - 1);
  for (std::size_t i = 0; i < inc.size(); ++i) {
    inc[i].resize(dimension_);
    for (std::size_t j = 0; j < dimension_; ++j) {
      inc[i][j] = grid[i] == grid[i + 1] ? 0.0 : v[i + 1][j] - v[i][j];
    }
  }
  return inc;
}

std::vector<double> BrownianPath::subdivide(double t0, double t1, double t_mid) const {
  check_time(t0);
  check_time(t1);
  if (!(t0 < t_mid && t_mid < t1)) {
    throw DomainError("subdivision point " + std::to_string(t_mid) + " not inside (" +
                      std::to_string(t0) + ", " + std::to_string(t1) + ")");
  }
  return increment(t0, t_mid);
}

}  // namespace sdebnn
