#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls the library's loss, mitigation or selection code; loops are written
// out directly so the structured implementations have something to disagree
// with.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "gcl/losses.hpp"
#include "gcl/numcore.hpp"

namespace oracle {

using gcl::Mat;
using gcl::Vec;

double naive_dot(const double* a, const double* b, std::size_t n);

/// Direct double-loop evaluation of the image-wise loss (no log-sum-exp).
double image_loss(const std::vector<Vec>& z, const std::vector<std::vector<std::size_t>>& positives,
                  double tau);

/// Direct evaluation of the pixel-wise loss averaged over pairings.
double pixel_loss(const Mat& ui, const Mat& uj, const std::vector<gcl::PixelPairing>& pairings,
                  double tau);

/// Positive sets from the definition, by enumeration.
std::vector<std::vector<std::size_t>> positive_sets(const std::vector<std::size_t>& source,
                                                    const std::vector<std::vector<int>>& meta,
                                                    int meta_index);

struct MitigationTrace {
  std::vector<Vec> modified;
  Mat omega_hat;
  std::vector<double> omegas;   // per visited pair, in visit order
  std::vector<double> targets;  // per visited pair, post-update
  std::vector<bool> fired;
  Vec direction;
};

/// Straight-line transcription of the sequential mitigation pass.
MitigationTrace mitigate(const std::vector<Vec>& grads, Mat omega_hat, double beta);

/// Top-k indices of `row` by full sort (desc value, asc index).
std::vector<std::size_t> top_k(const std::vector<double>& row, std::size_t k);

/// Indices of the k smallest scores by full sort (asc score, desc affinity, asc index).
std::vector<std::size_t> lowest_k(const std::vector<double>& scores,
                                  const std::vector<double>& affinity,
                                  const std::vector<std::size_t>& index, std::size_t k);

Vec random_vec(std::mt19937_64& rng, std::size_t n, double scale = 1.0);
Vec random_unit(std::mt19937_64& rng, std::size_t n);
Mat random_unit_rows(std::mt19937_64& rng, std::size_t rows, std::size_t cols);

}  // namespace oracle
