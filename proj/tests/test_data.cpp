#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <vector>

#include "actevo/data.hpp"
#include "actevo/errors.hpp"
#include "actevo/rng.hpp"

using namespace actevo;
using data::Dataset;
using data::SyntheticKind;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "actevo_data_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("zero-noise spirals lie exactly on their arms") {
  Rng rng(10);
  const Dataset ds =
      data::generate_synthetic(SyntheticKind::kSpirals, 500, 3, 0.0, rng);
  REQUIRE(ds.size() == 1500);
  REQUIRE(ds.dim() == 2);

  // Independent arm model: radius in [r0, r1] affine in the parameter, and
  // the angle determined by the radius up to the class offset. Mirrors the
  // generator's documented geometry.
  constexpr double r0 = 0.4, r1 = 2.4, turns = 1.0;
  for (int i = 0; i < ds.size(); ++i) {
    const double x = ds.features.at(i, 0);
    const double y = ds.features.at(i, 1);
    const int c = ds.labels[i];
    const double r = std::hypot(x, y);
    CHECK(r >= r0 - 1e-9);
    CHECK(r <= r1 + 1e-9);
    const double t = (r - r0) / (r1 - r0);
    const double theta =
        2.0 * std::numbers::pi * (turns * t + static_cast<double>(c) / 3.0);
    CHECK(x == doctest::Approx(r * std::cos(theta)).epsilon(1e-9));
    CHECK(y == doctest::Approx(r * std::sin(theta)).epsilon(1e-9));
  }
}

TEST_CASE("zero-noise gaussians collapse to their centroids") {
  Rng rng(11);
  const Dataset ds =
      data::generate_synthetic(SyntheticKind::kGaussians, 20, 4, 0.0, rng);
  for (int c = 0; c < 4; ++c) {
    double cx = 0, cy = 0;
    bool first = true;
    for (int i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] != c) continue;
      if (first) {
        cx = ds.features.at(i, 0);
        cy = ds.features.at(i, 1);
        first = false;
      }
      CHECK(ds.features.at(i, 0) == cx);
      CHECK(ds.features.at(i, 1) == cy);
    }
  }
}

TEST_CASE("moons requires two classes") {
  Rng rng(12);
  CHECK_THROWS_AS(data::generate_synthetic(SyntheticKind::kMoons, 10, 3, 0.1, rng),
                  ConfigError);
  const Dataset ds =
      data::generate_synthetic(SyntheticKind::kMoons, 10, 2, 0.1, rng);
  CHECK(ds.size() == 20);
}

TEST_CASE("generation is deterministic per seed") {
  Rng a(77), b(77), c(78);
  const Dataset d1 =
      data::generate_synthetic(SyntheticKind::kSpirals, 50, 3, 0.15, a);
  const Dataset d2 =
      data::generate_synthetic(SyntheticKind::kSpirals, 50, 3, 0.15, b);
  const Dataset d3 =
      data::generate_synthetic(SyntheticKind::kSpirals, 50, 3, 0.15, c);
  CHECK(d1.features.data == d2.features.data);
  CHECK(d1.features.data != d3.features.data);
}

TEST_CASE("split_balanced produces exact per-class counts") {
  Rng rng(13);
  Dataset ds = data::generate_synthetic(SyntheticKind::kSpirals, 500, 3, 0.1, rng);
  ds = data::split_balanced(std::move(ds), 50, 0, rng);
  CHECK(ds.train_idx.size() == 1350);
  CHECK(ds.val_idx.size() == 150);
  CHECK(ds.test_idx.empty());

  std::vector<int> histogram(3, 0);
  for (int i : ds.val_idx) ++histogram[ds.labels[i]];
  CHECK(histogram == std::vector<int>{50, 50, 50});

  // Disjoint and complete.
  std::set<int> all;
  for (int i : ds.train_idx) all.insert(i);
  for (int i : ds.val_idx) all.insert(i);
  CHECK(all.size() == 1500);
}

TEST_CASE("a CIFAR-10 shaped dataset splits 45k/5k") {
  Dataset ds;
  const int n = 50000;
  ds.classes = 10;
  ds.features = kernels::Matrix(n, 2);
  ds.labels.resize(n);
  for (int i = 0; i < n; ++i) ds.labels[i] = i % 10;
  Rng rng(14);
  ds = data::split_balanced(std::move(ds), 500, 0, rng);
  CHECK(ds.train_idx.size() == 45000);
  CHECK(ds.val_idx.size() == 5000);
}

TEST_CASE("insufficient data raises") {
  Rng rng(15);
  Dataset ds = data::generate_synthetic(SyntheticKind::kSpirals, 40, 3, 0.1, rng);
  CHECK_THROWS_AS(data::split_balanced(std::move(ds), 40, 0, rng),
                  InsufficientData);
}

TEST_CASE("re-splitting with the same seed reproduces the index sets") {
  Rng gen(16);
  const Dataset base =
      data::generate_synthetic(SyntheticKind::kSpirals, 100, 3, 0.1, gen);
  Rng s1(99), s2(99);
  const Dataset a = data::split_balanced(base, 20, 10, s1);
  const Dataset b = data::split_balanced(base, 20, 10, s2);
  CHECK(a.val_idx == b.val_idx);
  CHECK(a.test_idx == b.test_idx);
  CHECK(a.train_idx == b.train_idx);
}

TEST_CASE("standardize centers the train split") {
  Rng rng(17);
  Dataset ds = data::generate_synthetic(SyntheticKind::kSpirals, 300, 3, 0.2, rng);
  ds = data::split_balanced(std::move(ds), 30, 30, rng);
  ds = data::standardize(std::move(ds));
  REQUIRE(ds.normalization.has_value());

  for (int j = 0; j < ds.dim(); ++j) {
    double mean = 0;
    for (int i : ds.train_idx) mean += ds.features.at(i, j);
    mean /= ds.train_idx.size();
    double var = 0;
    for (int i : ds.train_idx) {
      const double d = ds.features.at(i, j) - mean;
      var += d * d;
    }
    var /= ds.train_idx.size();
    CHECK(std::fabs(mean) <= 1e-9);
    CHECK(std::fabs(std::sqrt(var) - 1.0) <= 1e-6);
  }
}

TEST_CASE("CIFAR batch loader") {
  const auto path = temp_file("batch.bin");
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    // Two records: labels 3 and 7, recognizable first pixels.
    std::vector<unsigned char> rec(3073, 0);
    rec[0] = 3;
    rec[1] = 255;
    rec[2] = 51;
    out.write(reinterpret_cast<const char*>(rec.data()), rec.size());
    rec[0] = 7;
    rec[1] = 0;
    rec[2] = 102;
    out.write(reinterpret_cast<const char*>(rec.data()), rec.size());
  }
  const Dataset ds = data::load_image_binary(path.string(), data::ImageFormat::kCifarBatch);
  CHECK(ds.size() == 2);
  CHECK(ds.dim() == 3072);
  CHECK(ds.labels == std::vector<int>{3, 7});
  CHECK(ds.features.at(0, 0) == doctest::Approx(1.0));
  CHECK(ds.features.at(0, 1) == doctest::Approx(51.0 / 255.0));
  CHECK(ds.features.at(1, 1) == doctest::Approx(102.0 / 255.0));
}

TEST_CASE("a full-size CIFAR batch has 10000 rows") {
  const auto path = temp_file("batch_full.bin");
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    std::vector<char> zeros(3073 * 1000, 0);
    for (int i = 0; i < 10; ++i)
      out.write(zeros.data(), zeros.size());
  }
  const Dataset ds = data::load_image_binary(path.string(), data::ImageFormat::kCifarBatch);
  CHECK(ds.size() == 10000);
  CHECK(ds.dim() == 3072);
}

TEST_CASE("truncated CIFAR batch reports the byte offset") {
  const auto path = temp_file("batch_trunc.bin");
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    std::vector<char> bytes(3073 + 100, 1);
    out.write(bytes.data(), bytes.size());
  }
  try {
    data::load_image_binary(path.string(), data::ImageFormat::kCifarBatch);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.byte_offset == 3073);
  }
}

TEST_CASE("IDX image and label files") {
  const auto img_path = temp_file("images.idx");
  {
    std::ofstream out(img_path, std::ios::binary | std::ios::trunc);
    const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 100,
                                    0, 0, 0, 28, 0, 0, 0, 28};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    std::vector<char> pixels(100 * 28 * 28, 0);
    pixels[0] = static_cast<char>(255);
    out.write(pixels.data(), pixels.size());
  }
  const Dataset imgs = data::load_image_binary(img_path.string(), data::ImageFormat::kIdx);
  CHECK(imgs.size() == 100);
  CHECK(imgs.dim() == 784);
  CHECK(imgs.features.at(0, 0) == doctest::Approx(1.0));

  const auto lbl_path = temp_file("labels.idx");
  {
    std::ofstream out(lbl_path, std::ios::binary | std::ios::trunc);
    const unsigned char header[] = {0, 0, 8, 1, 0, 0, 0, 4};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    const unsigned char labels[] = {0, 1, 2, 1};
    out.write(reinterpret_cast<const char*>(labels), sizeof labels);
  }
  const Dataset lbls = data::load_image_binary(lbl_path.string(), data::ImageFormat::kIdx);
  CHECK(lbls.labels == std::vector<int>{0, 1, 2, 1});
  CHECK(lbls.classes == 3);

  const auto bad_path = temp_file("bad.idx");
  {
    std::ofstream out(bad_path, std::ios::binary | std::ios::trunc);
    const unsigned char header[] = {9, 9, 9, 9, 0, 0, 0, 1};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
  }
  try {
    data::load_image_binary(bad_path.string(), data::ImageFormat::kIdx);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.byte_offset == 0);
  }
}
