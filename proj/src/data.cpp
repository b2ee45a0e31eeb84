#include "actevo/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

#include "actevo/errors.hpp"

namespace actevo::data {

SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "spirals") return SyntheticKind::kSpirals;
  if (s == "gaussians") return SyntheticKind::kGaussians;
  if (s == "moons") return SyntheticKind::kMoons;
  throw ConfigError("unknown synthetic dataset kind '" + s + "'");
}

std::string to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::kSpirals: return "spirals";
    case SyntheticKind::kGaussians: return "gaussians";
    case SyntheticKind::kMoons: return "moons";
  }
  return "?";
}

namespace {

constexpr double kPi = std::numbers::pi;

// Spiral arm geometry. Arms sweep 1.5 turns with radii growing from
// kR0 to kR1; with 3 classes and noise 0.15 the arms overlap enough that
// the nonlinearity matters but a small MLP still separates them well.
constexpr double kR0 = 0.4;
constexpr double kR1 = 2.4;
constexpr double kTurns = 1.0;

}  // namespace

Dataset generate_synthetic(SyntheticKind kind, int n_per_class, int classes,
                           double noise, Rng& rng) {
  if (n_per_class < 1 || classes < 1)
    throw ConfigError("n_per_class and classes must be positive");
  if (kind == SyntheticKind::kMoons && classes != 2)
    throw ConfigError("moons requires exactly 2 classes");
  if (noise < 0) throw ConfigError("noise must be non-negative");

  Dataset ds;
  ds.classes = classes;
  ds.features = kernels::Matrix(n_per_class * classes, 2);
  ds.labels.resize(static_cast<std::size_t>(n_per_class) * classes);

  int row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++row) {
      double px = 0.0, py = 0.0;
      switch (kind) {
        case SyntheticKind::kSpirals: {
          const double t = rng.uniform();
          const double r = kR0 + (kR1 - kR0) * t;
          const double theta = 2.0 * kPi * (kTurns * t + static_cast<double>(c) / classes);
          px = r * std::cos(theta);
          py = r * std::sin(theta);
          break;
        }
        case SyntheticKind::kGaussians: {
          const double theta = 2.0 * kPi * c / classes;
          px = 2.0 * std::cos(theta);
          py = 2.0 * std::sin(theta);
          break;
        }
        case SyntheticKind::kMoons: {
          const double t = rng.uniform() * kPi;
          if (c == 0) {
            px = std::cos(t);
            py = std::sin(t);
          } else {
            px = 1.0 - std::cos(t);
            py = 0.5 - std::sin(t);
          }
          break;
        }
      }
      px += noise * rng.gaussian();
      py += noise * rng.gaussian();
      ds.features.at(row, 0) = px;
      ds.features.at(row, 1) = py;
      ds.labels[row] = c;
    }
  }
  return ds;
}

Dataset split_balanced(Dataset data, int val_per_class, int test_per_class,
                       Rng& rng) {
  if (val_per_class < 1 || test_per_class < 0)
    throw ConfigError("val_per_class must be >= 1, test_per_class >= 0");

  std::vector<std::vector<int>> by_class(data.classes);
  for (int i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

  for (int c = 0; c < data.classes; ++c) {
    if (static_cast<int>(by_class[c].size()) < val_per_class + test_per_class + 1)
      throw InsufficientData(
          "class " + std::to_string(c) + " has " +
          std::to_string(by_class[c].size()) + " examples, needs more than " +
          std::to_string(val_per_class + test_per_class));
  }

  data.train_idx.clear();
  data.val_idx.clear();
  data.test_idx.clear();
  for (int c = 0; c < data.classes; ++c) {
    std::vector<int>& pool = by_class[c];
    // Fisher-Yates with the caller's generator.
    for (std::size_t i = pool.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_int(i);
      std::swap(pool[i - 1], pool[j]);
    }
    int p = 0;
    for (int i = 0; i < val_per_class; ++i) data.val_idx.push_back(pool[p++]);
    for (int i = 0; i < test_per_class; ++i) data.test_idx.push_back(pool[p++]);
    for (; p < static_cast<int>(pool.size()); ++p)
      data.train_idx.push_back(pool[p]);
  }
  std::sort(data.train_idx.begin(), data.train_idx.end());
  std::sort(data.val_idx.begin(), data.val_idx.end());
  std::sort(data.test_idx.begin(), data.test_idx.end());
  return data;
}

Dataset standardize(Dataset data) {
  if (data.train_idx.empty())
    throw ConfigError("standardize requires an assigned train split");
  const int d = data.dim();
  Normalization norm;
  norm.mean.assign(d, 0.0);
  norm.stdev.assign(d, 0.0);
  for (int i : data.train_idx)
    for (int j = 0; j < d; ++j) norm.mean[j] += data.features.at(i, j);
  for (int j = 0; j < d; ++j) norm.mean[j] /= data.train_idx.size();
  for (int i : data.train_idx)
    for (int j = 0; j < d; ++j) {
      const double dev = data.features.at(i, j) - norm.mean[j];
      norm.stdev[j] += dev * dev;
    }
  for (int j = 0; j < d; ++j) {
    norm.stdev[j] = std::sqrt(norm.stdev[j] / data.train_idx.size());
    if (norm.stdev[j] == 0.0) norm.stdev[j] = 1.0;  // constant feature
  }
  for (int i = 0; i < data.size(); ++i)
    for (int j = 0; j < d; ++j)
      data.features.at(i, j) =
          (data.features.at(i, j) - norm.mean[j]) / norm.stdev[j];
  data.normalization = std::move(norm);
  return data;
}

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'", 0);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t at) {
  if (at + 4 > buf.size())
    throw FormatError("truncated header", at);
  return (static_cast<std::uint32_t>(buf[at]) << 24) |
         (static_cast<std::uint32_t>(buf[at + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[at + 2]) << 8) |
         static_cast<std::uint32_t>(buf[at + 3]);
}

Dataset load_cifar_batch(const std::vector<unsigned char>& buf) {
  constexpr std::size_t kRecord = 3073;  // 1 label byte + 32*32*3 pixels
  if (buf.empty()) throw FormatError("empty file", 0);
  if (buf.size() % kRecord != 0)
    throw FormatError("file size " + std::to_string(buf.size()) +
                          " is not a multiple of 3073",
                      buf.size() - buf.size() % kRecord);
  const int n = static_cast<int>(buf.size() / kRecord);
  Dataset ds;
  ds.features = kernels::Matrix(n, 3072);
  ds.labels.resize(n);
  int max_label = 0;
  for (int i = 0; i < n; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * kRecord;
    ds.labels[i] = buf[base];
    max_label = std::max(max_label, ds.labels[i]);
    double* row = ds.features.row(i);
    for (int j = 0; j < 3072; ++j) row[j] = buf[base + 1 + j] / 255.0;
  }
  ds.classes = max_label + 1;
  return ds;
}

Dataset load_idx(const std::vector<unsigned char>& buf) {
  const std::uint32_t magic = read_be32(buf, 0);
  const std::uint32_t dtype = (magic >> 8) & 0xff;
  const int ndims = magic & 0xff;
  if ((magic >> 16) != 0 || dtype != 0x08 || ndims < 1 || ndims > 3)
    throw FormatError("bad IDX magic", 0);
  std::vector<std::uint32_t> dims(ndims);
  for (int i = 0; i < ndims; ++i) dims[i] = read_be32(buf, 4 + 4 * i);
  std::size_t total = 1;
  for (std::uint32_t d : dims) total *= d;
  const std::size_t payload_at = 4 + 4 * static_cast<std::size_t>(ndims);
  if (buf.size() != payload_at + total)
    throw FormatError("IDX payload size mismatch: expected " +
                          std::to_string(payload_at + total) + " bytes",
                      std::min(buf.size(), payload_at + total));

  Dataset ds;
  const int n = static_cast<int>(dims[0]);
  if (ndims == 1) {
    // Label file: keep a placeholder feature column.
    ds.features = kernels::Matrix(n, 1);
    ds.labels.resize(n);
    int max_label = 0;
    for (int i = 0; i < n; ++i) {
      ds.labels[i] = buf[payload_at + i];
      max_label = std::max(max_label, ds.labels[i]);
    }
    ds.classes = max_label + 1;
  } else {
    const int row_dim = static_cast<int>(total / dims[0]);
    ds.features = kernels::Matrix(n, row_dim);
    ds.labels.assign(n, 0);
    ds.classes = 1;
    for (int i = 0; i < n; ++i) {
      double* row = ds.features.row(i);
      const std::size_t base = payload_at + static_cast<std::size_t>(i) * row_dim;
      for (int j = 0; j < row_dim; ++j) row[j] = buf[base + j] / 255.0;
    }
  }
  return ds;
}

}  // namespace

Dataset load_image_binary(const std::string& path, ImageFormat format) {
  const std::vector<unsigned char> buf = read_file(path);
  switch (format) {
    case ImageFormat::kCifarBatch: return load_cifar_batch(buf);
    case ImageFormat::kIdx: return load_idx(buf);
  }
  throw FormatError("unknown format", 0);
}

}  // namespace actevo::data
