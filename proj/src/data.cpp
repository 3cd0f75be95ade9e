#include "sdebnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <string>

#include "sdebnn/errors.hpp"
#include "sdebnn/random.hpp"

namespace sdebnn::data {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      break;
  }
  return "test";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

Dataset Dataset::rows(std::span<const std::size_t> idx) const {
  Dataset out;
  out.n_classes = n_classes;
  const std::size_t d = input_dim();
  out.inputs = Tensor(Shape{idx.size(), d});
  const std::size_t k = targets.rank() == 2 ? targets.shape()[1] : 0;
  if (k > 0) out.targets = Tensor(Shape{idx.size(), k});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const std::size_t i = idx[r];
    if (i >= size()) throw ContractError("row index " + std::to_string(i) + " out of range");
    std::copy_n(inputs.data() + i * d, d, out.inputs.data() + r * d);
    if (k > 0) std::copy_n(targets.data() + i * k, k, out.targets.data() + r * k);
    if (classification()) out.labels.push_back(labels[i]);
    out.split.push_back(split[i]);
  }
  return out;
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) idx.push_back(i);
  return idx;
}

Dataset Dataset::subset(Split s) const { return rows(indices(s)); }

void Dataset::validate() const {
  if (size() == 0) throw ContractError("dataset is empty");
  if (split.size() != size()) throw ContractError("split tags do not cover every row");
  if (classification()) {
    if (labels.size() != size()) throw ContractError("labels do not cover every row");
    for (std::size_t y : labels)
      if (y >= n_classes) throw ContractError("label " + std::to_string(y) + " out of range");
  } else if (targets.rank() != 2 || targets.shape()[0] != size()) {
    throw ContractError("regression targets do not cover every row");
  }
}

double toy1d_target(double x) { return std::sin(2.0 * x) * std::exp(-0.3 * x * x); }

Dataset gen_toy1d(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw ContractError("toy1d needs n >= 2");
  if (!(noise >= 0.0)) throw DomainError("noise must be >= 0");
  rng::SequentialRng rng(seed, 0x746f7931);
  Dataset ds;
  ds.inputs = Tensor(Shape{n, 1});
  ds.targets = Tensor(Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-3.0, 3.0);
    ds.inputs[i] = x;
    ds.targets[i] = toy1d_target(x) + noise * rng.normal();
  }
  ds.split.assign(n, Split::train);
  return ds;
}

Dataset gen_cauchy_two_obs() {
  Dataset ds;
  ds.inputs = Tensor::matrix(2, 1, {1.0, 1.0});
  ds.targets = Tensor::matrix(2, 1, {1.5, -1.5});
  ds.split.assign(2, Split::train);
  return ds;
}

Dataset gen_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw ContractError("two moons needs n >= 2");
  rng::SequentialRng rng(seed, 0x6d6f6f6e);
  Dataset ds;
  ds.n_classes = 2;
  ds.inputs = Tensor(Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i < n / 2 ? 0 : 1;
    const double theta = std::numbers::pi * rng.uniform();
    double x = std::cos(theta), y = std::sin(theta);
    if (label == 1) {
      x = 1.0 - x;
      y = 0.5 - y;
    }
    ds.inputs.at(i, 0) = x + noise * rng.normal();
    ds.inputs.at(i, 1) = y + noise * rng.normal();
    ds.labels.push_back(label);
  }
  ds.split.assign(n, Split::train);
  return ds;
}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> file, std::size_t offset) {
  if (offset + 4 > file.size()) throw FormatError("truncated IDX header", file.size());
  return (std::uint32_t{file[offset]} << 24) | (std::uint32_t{file[offset + 1]} << 16) |
         (std::uint32_t{file[offset + 2]} << 8) | std::uint32_t{file[offset + 3]};
}

}  // namespace

IdxArray parse_idx(std::span<const std::uint8_t> file, std::uint32_t expected_magic) {
  const std::uint32_t magic = read_be32(file, 0);
  if (magic != expected_magic) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "bad IDX magic 0x%08x (expected 0x%08x)", magic, expected_magic);
    throw FormatError(buf, 0);
  }
  if ((magic >> 8) != 0x08) throw FormatError("IDX payload type is not unsigned byte", 2);
  IdxArray a;
  const std::size_t rank = magic & 0xff;
  std::size_t count = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    a.dims.push_back(read_be32(file, 4 + 4 * k));
    count *= a.dims.back();
  }
  const std::size_t header = 4 + 4 * rank;
  if (file.size() < header + count) {
    throw FormatError("truncated IDX payload: need " + std::to_string(header + count) + " bytes", file.size());
  }
  if (file.size() > header + count) throw FormatError("trailing bytes after IDX payload", header + count);
  a.bytes.assign(file.begin() + static_cast<std::ptrdiff_t>(header), file.end());
  return a;
}

IdxArray read_idx(const std::filesystem::path& path, std::uint32_t expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(file, expected_magic);
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t pool,
                 std::size_t limit) {
  const auto img = read_idx(images, kIdxImagesMagic);
  const auto lab = read_idx(labels, kIdxLabelsMagic);
  if (img.dims.size() != 3) throw FormatError("image file must have 3 dimensions", 3);
  if (lab.dims.size() != 1) throw FormatError("label file must have 1 dimension", 3);
  if (img.dims[0] != lab.dims[0]) {
    throw FormatError("image count " + std::to_string(img.dims[0]) + " != label count " + std::to_string(lab.dims[0]),
                      4);
  }
  if (pool == 0) pool = 1;
  const std::size_t rows = img.dims[1], cols = img.dims[2];
  if (rows % pool != 0 || cols % pool != 0) throw ConfigError("pool size must divide the image size");
  const std::size_t pr = rows / pool, pc = cols / pool;
  std::size_t n = img.dims[0];
  if (limit > 0) n = std::min(n, limit);

  Dataset ds;
  ds.n_classes = 10;
  ds.inputs = Tensor(Shape{n, pr * pc});
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* px = img.bytes.data() + i * rows * cols;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        ds.inputs.at(i, (r / pool) * pc + c / pool) += px[r * cols + c] / 255.0 / static_cast<double>(pool * pool);
    if (lab.bytes[i] >= 10) throw FormatError("label " + std::to_string(lab.bytes[i]) + " out of range", 8 + i);
    ds.labels.push_back(lab.bytes[i]);
  }
  ds.split.assign(n, Split::train);
  return ds;
}

void split_validation(Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must lie in [0, 1)");
  auto train = ds.indices(Split::train);
  rng::SequentialRng rng(seed, 0x76616c);
  for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[rng.below(i)]);
  const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train.size())));
  for (std::size_t i = 0; i < n_val; ++i) ds.split[train[i]] = Split::val;
}

Standardizer Standardizer::fit(const Tensor& x) {
  if (x.rank() != 2 || x.shape()[0] == 0) throw ContractError("standardizer needs a non-empty matrix");
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x.at(i, j);
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.scale[j] += (x.at(i, j) - s.mean[j]) * (x.at(i, j) - s.mean[j]);
  for (auto& v : s.scale) {
    v = std::sqrt(v / static_cast<double>(n));
    if (!(v > 0.0)) v = 1.0;  // constant column
  }
  return s;
}

Tensor Standardizer::apply(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != mean.size()) throw ContractError("standardizer column mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < x.shape()[0]; ++i)
    for (std::size_t j = 0; j < mean.size(); ++j) out.at(i, j) = (x.at(i, j) - mean[j]) / scale[j];
  return out;
}

Standardizer standardize(Dataset& ds) {
  const auto s = Standardizer::fit(ds.rows(ds.indices(Split::train)).inputs);
  ds.inputs = s.apply(ds.inputs);
  return s;
}

void write_csv(std::ostream& os, const Dataset& ds) {
  const std::size_t d = ds.input_dim();
  const std::size_t k = ds.targets.rank() == 2 ? ds.targets.shape()[1] : 0;
  for (std::size_t j = 0; j < d; ++j) os << 'x' << j << ',';
  if (ds.classification()) {
    os << "label,";
  } else {
    for (std::size_t j = 0; j < k; ++j) os << 'y' << j << ',';
  }
  os << "split\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) os << ds.inputs.at(i, j) << ',';
    if (ds.classification()) {
      os << ds.labels[i] << ',';
    } else {
      for (std::size_t j = 0; j < k; ++j) os << ds.targets.at(i, j) << ',';
    }
    os << to_string(ds.split[i]) << '\n';
  }
  os.precision(old);
}

}  // namespace sdebnn::data
