#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "sdebnn/tensor.hpp"

namespace sdebnn::data {

using ad::Shape;
using ad::Tensor;

enum class Split : std::uint8_t { train, val, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view name);

/// Rows of inputs with either real targets (regression) or class labels.
struct Dataset {
  Tensor inputs;                     ///< [N x d_in]
  Tensor targets;                    ///< [N x d_out]; empty for classification
  std::vector<std::size_t> labels;   ///< classification only
  std::size_t n_classes = 0;
  std::vector<Split> split;          ///< one tag per row

  std::size_t size() const { return inputs.rank() == 2 ? inputs.shape()[0] : 0; }
  std::size_t input_dim() const { return inputs.rank() == 2 ? inputs.shape()[1] : 0; }
  bool classification() const noexcept { return n_classes > 0; }

  /// Rows in the given order (split tags carried over).
  Dataset rows(std::span<const std::size_t> idx) const;
  Dataset subset(Split s) const;
  std::vector<std::size_t> indices(Split s) const;
  void validate() const;
};

/// Regression target of the 1D toy: y = sin(2x) exp(-0.3 x^2).
double toy1d_target(double x);

/// x ~ U(-3, 3), y = toy1d_target(x) + noise * N(0, 1). All rows train.
Dataset gen_toy1d(std::size_t n, double noise, std::uint64_t seed);

/// Two Cauchy observations of the latent weight process, both at t = 1,
/// y = +1.5 and -1.5. inputs hold the observation times, targets the values.
Dataset gen_cauchy_two_obs();
inline constexpr double kCauchyToyScale = 0.1;

/// Interleaved half circles, n/2 per class, isotropic Gaussian noise.
Dataset gen_two_moons(std::size_t n, double noise, std::uint64_t seed);

/// IDX array (big-endian dims, unsigned-byte payload only).
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
};

IdxArray parse_idx(std::span<const std::uint8_t> file, std::uint32_t expected_magic);
IdxArray read_idx(const std::filesystem::path& path, std::uint32_t expected_magic);

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Images (magic 0x803, N x rows x cols) and labels (magic 0x801, N); pixels
/// scaled to [0, 1], 10 classes. `pool` > 1 averages pool x pool blocks.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t pool = 1,
                 std::size_t limit = 0);

/// Tags a random `fraction` of the train rows as val.
void split_validation(Dataset& ds, double fraction, std::uint64_t seed);

/// Per-column zero-mean / unit-variance map fitted on one split.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Tensor& x);
  Tensor apply(const Tensor& x) const;
};

/// Fits on the train rows of `ds` and transforms every row in place.
Standardizer standardize(Dataset& ds);

/// Header x0..x{d-1}, then y0.. or label, then split.
void write_csv(std::ostream& os, const Dataset& ds);

}  // namespace sdebnn::data
