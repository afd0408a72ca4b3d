#pragma once

// Frozen-representation probes.
//
//   linear:     multinomial logistic regression on z against the latent image
//               class, k-fold cross-validated accuracy
//   pixel:      nearest-centroid accuracy of U rows against latent pixel
//               classes, centroids fitted on the training folds' images
//   clustering: NMI between k-means clusters of z and the latent image class

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gcl/encoder.hpp"
#include "gcl/synthdata.hpp"

namespace gcl {

struct ProbeConfig {
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  double l2 = 1e-3;
  std::size_t iterations = 400;
  double step_size = 0.5;
  std::size_t kmeans_restarts = 5;
  std::size_t kmeans_iterations = 100;
};

struct ProbeScores {
  double linear_accuracy = 0.0;
  std::vector<double> fold_accuracy;
  std::size_t failed_folds = 0;
  double pixel_accuracy = 0.0;
  double nmi = 0.0;
};

/// Mean held-out accuracy over folds. Folds whose training split is
/// degenerate (fewer than two classes, or a non-finite fit) are counted in
/// `failed` and excluded from the mean.
double linear_probe_accuracy(const std::vector<Vec>& features, const std::vector<int>& labels,
                             std::size_t classes, const ProbeConfig& config,
                             std::vector<double>* fold_accuracy = nullptr,
                             std::size_t* failed = nullptr);

/// Per-image row blocks with per-row labels; folds split by image.
double nearest_centroid_accuracy(const std::vector<Mat>& rows_per_image,
                                 const std::vector<std::vector<int>>& labels_per_image,
                                 std::size_t classes, const ProbeConfig& config);

/// Normalized mutual information 2 I(a;b) / (H(a) + H(b)); 1 when both are constant.
double normalized_mutual_information(const std::vector<int>& a, const std::vector<int>& b);

/// Best-of-restarts k-means++ clustering assignments.
std::vector<int> kmeans(const std::vector<Vec>& points, std::size_t k, std::uint64_t seed,
                        std::size_t restarts, std::size_t iterations);

struct Embeddings {
  std::vector<Vec> image;   // z per image
  std::vector<Mat> pixels;  // U per image
};

Embeddings embed(const EncoderParams& params, const Dataset& data);

ProbeScores probe(const EncoderParams& params, const Dataset& data, const ProbeConfig& config);

}  // namespace gcl
