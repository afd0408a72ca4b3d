#pragma once

// Self-paced screening of candidate positive pixels.
//
// For an anchor pixel, the Top-K most affine pixels of the partner image form
// the candidate pool; the rest are negatives. Each candidate is scored by the
// norm of the gradient its single-positive loss term induces on the last
// encoder layer, and only the pace(t) lowest-scoring candidates are used:
//
//   pace(t) = clamp(round((1 + ln(t/T + e^-4) / 4) · |pool|), 1, |pool|)

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gcl/encoder.hpp"
#include "gcl/numcore.hpp"

namespace gcl {

struct PaceConfig {
  std::uint64_t total_steps = 500;
  double pool_fraction = 0.3;

  /// Throws ConfigError unless total_steps >= 1 and pool_fraction in (0, 1].
  void validate() const;
};

/// ⌈K · pixels⌉, at least 1.
std::size_t pool_size_for(std::size_t pixels, double pool_fraction);

/// Indices of the ⌈K·len⌉ highest affinities, ordered by descending affinity,
/// ties broken by lower index.
std::vector<std::size_t> build_pool(ConstSpan affinity_row, double pool_fraction);

/// Every index in [0, len) not in `pool`, ascending.
std::vector<std::size_t> pool_complement(std::size_t len, std::span<const std::size_t> pool);

/// Unrounded schedule value (1 + ln(t/T + e^-4)/4) · pool_size.
double pace_raw(std::uint64_t t, std::uint64_t total_steps, std::size_t pool_size);

/// Number of admitted positives at step t.
std::size_t pace_size(std::uint64_t t, std::uint64_t total_steps, std::size_t pool_size);

/// Gradient norm on the last encoder layer induced by the single-positive
/// pixel-loss term of `positive` (partner row) for anchor row `anchor`.
double score_positive(const EncoderParams& params, const RepresentationSet& anchor_reps,
                      const ForwardTrace& anchor_trace, std::size_t anchor,
                      const Mat& partner_pix, std::size_t positive,
                      std::span<const std::size_t> negatives, double tau,
                      ScoreLayers layers = ScoreLayers::kEncoderLast);

struct ScoredCandidate {
  std::size_t index = 0;  // pixel index in the partner image
  double affinity = 0.0;
  double score = 0.0;
  bool admitted = false;
};

/// Admits the pace_size(t, T, |pool|) candidates with the smallest scores
/// (ties: higher affinity, then lower index), sets their `admitted` flags and
/// returns their pixel indices in admission order.
std::vector<std::size_t> screen(std::span<ScoredCandidate> pool, std::uint64_t t,
                                std::uint64_t total_steps);

}  // namespace gcl
