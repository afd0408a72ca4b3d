#pragma once

// Contrastive losses and their analytic gradients.
//
// Image-wise loss with meta-label positives, for anchor i over a batch of 2N
// unit vectors z:
//
//   L_i = -1/|P_i| Σ_{j∈P_i} log( exp(z_i·z_j/τ) / Σ_{a≠i} exp(z_i·z_a/τ) )
//
// averaged over anchors. The denominator runs over every non-anchor item,
// positives included.
//
// Pixel-wise loss for anchor pixel u against a partner image, with selected
// positives S and negatives N:
//
//   L_u = -1/|S| Σ_{p∈S} log( exp(u·p/τ) / (exp(u·p/τ) + Σ_{n∈N} exp(u·n/τ)) )
//
// averaged over anchors. All denominators use max-shifted log-sum-exp.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gcl/numcore.hpp"

namespace gcl {

/// Identity and meta labels of the 2N items in a batch.
struct BatchLabels {
  std::vector<std::size_t> source_id;
  std::vector<std::vector<int>> meta;  // meta[item][label]

  std::size_t size() const { return source_id.size(); }
};

/// positives[i] = sorted indices of the positives of anchor i.
using PositiveIndexSet = std::vector<std::vector<std::size_t>>;

/// P_i = { j != i : same source, or same class under meta label `meta_index` }.
/// With no meta label only the co-augmented view(s) are positives.
PositiveIndexSet build_positive_sets(const BatchLabels& labels,
                                     std::optional<std::size_t> meta_index);

struct ImageLossResult {
  double loss = 0.0;
  std::vector<Vec> grad;  // dL/dz_k for every item k
};

/// Throws ConfigError if tau <= 0 and ContractError if an anchor has no positive.
ImageLossResult image_loss(std::span<const Vec> z, const PositiveIndexSet& positives, double tau);

/// Softmax weights of anchor i over the non-anchor items (entry i is 0).
Vec anchor_softmax(std::span<const Vec> z, std::size_t anchor, double tau);

/// A[u, v] = cosine(Z_i row u, Z_j row v).
Mat pixel_affinity(const Mat& zi, const Mat& zj);

/// One anchor pixel of image i paired against partner image j.
struct PixelPairing {
  std::size_t anchor = 0;
  std::vector<std::size_t> positives;  // rows of U_j in use as positives
  std::vector<std::size_t> negatives;  // rows of U_j in use as negatives
};

struct PixelLossResult {
  double loss = 0.0;
  Mat d_anchor_image;   // dL/dU_i
  Mat d_partner_image;  // dL/dU_j
};

/// Mean over `pairings` of the per-anchor pixel loss, with gradients for the
/// anchor rows and for every positive and negative row. Throws ContractError
/// on an empty positive set or an empty pairing list.
PixelLossResult pixel_loss(const Mat& ui, const Mat& uj, std::span<const PixelPairing> pairings,
                           double tau);

/// Closed-form d(L_u)/du for a single anchor:
///   -1/(τ|S|) Σ_{p∈S} Σ_{n∈N} exp(u·n/τ)(p - n) / (exp(u·p/τ) + Σ_{n'} exp(u·n'/τ))
Vec anchor_gradient(ConstSpan u, const Mat& partner, std::span<const std::size_t> positives,
                    std::span<const std::size_t> negatives, double tau);

struct MetaLoss {
  double image = 0.0;
  double pixel = 0.0;
};

struct JointLoss {
  std::vector<double> per_meta;  // image + pixel for each meta label
  double total = 0.0;
};

/// Σ_m (image_m + pixel_m).
JointLoss gcl_loss(std::span<const MetaLoss> terms);

}  // namespace gcl
