#pragma once

#include <optional>
#include <string>
#include <vector>

#include "actevo/kernels.hpp"
#include "actevo/rng.hpp"

namespace actevo::data {

enum class SyntheticKind { kSpirals, kGaussians, kMoons };
enum class Split { kTrain, kVal, kTest };
enum class ImageFormat { kIdx, kCifarBatch };

SyntheticKind synthetic_kind_from_string(const std::string& s);
std::string to_string(SyntheticKind k);

struct Normalization {
  std::vector<double> mean;
  std::vector<double> stdev;
};

struct Dataset {
  kernels::Matrix features;      // n x input_dim
  std::vector<int> labels;       // in [0, classes)
  int classes = 0;
  std::vector<int> train_idx, val_idx, test_idx;
  std::optional<Normalization> normalization;

  int size() const { return features.rows; }
  int dim() const { return features.cols; }
  const std::vector<int>& split(Split s) const {
    switch (s) {
      case Split::kTrain: return train_idx;
      case Split::kVal: return val_idx;
      default: return test_idx;
    }
  }
};

// Labeled 2-D point clouds. Spirals are k interleaved Archimedean arms;
// gaussians sit on a circle of centroids; moons are the usual two half
// circles (classes must be 2). Gaussian noise with standard deviation
// `noise` is added per coordinate. No splits are assigned.
Dataset generate_synthetic(SyntheticKind kind, int n_per_class, int classes,
                           double noise, Rng& rng);

// Balanced validation/test splits: exactly the requested count per class,
// sampled without replacement; the remainder becomes the train split.
Dataset split_balanced(Dataset data, int val_per_class, int test_per_class,
                       Rng& rng);

// Standardizes features with mean/std computed from the train split only
// and records them on the dataset.
Dataset standardize(Dataset data);

// Reads a CIFAR-style binary batch (3073-byte records) or an IDX file.
// Pixel features are scaled to [0, 1]. An IDX image file yields zero labels;
// an IDX label file yields labels with a 0x1 feature matrix.
Dataset load_image_binary(const std::string& path, ImageFormat format);

}  // namespace actevo::data
