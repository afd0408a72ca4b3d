#pragma once

// Synthetic pixel-grid datasets with several meta labels.
//
// Every image is built from two latent factors: factor A picks the class of
// an object drawn in the left half of the grid, factor B the class of an
// object in the right half; the remaining pixels are background. Pixel
// features are class means plus Gaussian noise, offset by a per-image
// nuisance shift that carries no label information.
//
// Meta labels (0-based class values):
//   label 0: factor A
//   label 1: factor B
//   label 2: factor A with a seeded fraction of images relabeled so that its
//            pairwise disagreement with label 0 matches contradiction_target
//
// Latent pixel classes: 0 background, 1..C_A object A, C_A+1..C_A+C_B object B.
// Latent image class: a * C_B + b.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gcl/numcore.hpp"

namespace gcl {

struct MetaLabelSpec {
  std::size_t labels = 3;  // 1..3, in the order listed above
  std::size_t factor_a_classes = 4;
  std::size_t factor_b_classes = 3;
  double contradiction_target = 0.4;  // disagreement of label 2 with label 0

  std::vector<std::size_t> classes() const;
};

struct SynthSpec {
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t feature_dim = 4;
  MetaLabelSpec meta;
  double mean_range = 1.0;         // class means drawn from [-r, r]^D
  double min_mean_distance = 1.0;  // rejection threshold between class means
  double pixel_noise = 0.35;
  double nuisance_scale = 0.3;  // std-dev of the per-image feature offset

  std::size_t pixels() const { return height * width; }
  std::size_t pixel_classes() const { return 1 + meta.factor_a_classes + meta.factor_b_classes; }
  std::size_t image_classes() const { return meta.factor_a_classes * meta.factor_b_classes; }
  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

struct SyntheticImage {
  std::size_t id = 0;
  Mat pixels;               // (H*W) x D, row-major over the grid
  std::vector<int> latent;  // per-pixel latent class
  std::vector<int> meta;    // one class per meta label
  int factor_a = 0;
  int factor_b = 0;
  int image_class = 0;

  bool operator==(const SyntheticImage&) const = default;
};

struct Dataset {
  SynthSpec spec;
  std::uint64_t seed = 0;
  Mat class_means;  // pixel_classes x D
  std::vector<SyntheticImage> images;

  std::size_t size() const { return images.size(); }
};

/// Deterministic in (spec, seed). Throws ConfigError if count < 2 or the
/// contradiction target cannot be met within ±0.05.
Dataset generate(const SynthSpec& spec, std::size_t count, std::uint64_t seed);

struct AugmentConfig {
  double noise_sigma = 0.1;
  bool mask = true;
};

struct ViewPair {
  SyntheticImage first;
  SyntheticImage second;
};

/// Two views: a rectangular mask of at most a quarter of the grid is zeroed,
/// then Gaussian noise is added. Labels and id are preserved.
ViewPair augment(const SyntheticImage& image, const SynthSpec& spec, const AugmentConfig& config,
                 std::uint64_t seed);

/// Fraction of unordered image pairs on which labels m1 and m2 disagree about
/// "same class".
double contradiction_rate(const Dataset& data, std::size_t m1, std::size_t m2);
double contradiction_rate(const std::vector<int>& first, const std::vector<int>& second);

}  // namespace gcl
