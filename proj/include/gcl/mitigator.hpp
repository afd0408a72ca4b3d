#pragma once

// Gradient-conflict mitigation across meta labels.
//
// Given one gradient per meta label, each g_i is visited in ascending order
// and, for every other j (ascending), compared against the *original* g_j.
// A running EMA target ω̂_ij tracks their cosine; whenever the current cosine
// falls below the target, a multiple of g_j is added to g'_i so that the
// new cosine equals the target exactly:
//
//   μ = ‖g'_i‖ (ω̂ √(1-ω²) - ω √(1-ω̂²)) / (‖g_j‖ √(1-ω̂²))
//
// The update direction is the mean of the modified gradients.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gcl/numcore.hpp"

namespace gcl {

enum class Relationship { kNonConflicting, kSlightlyConflicting, kConflicting };

std::string_view relationship_name(Relationship r);

/// ω = 1 (within 1e-12) non-conflicting; 0 <= ω < 1 slightly; ω < 0 conflicting.
Relationship classify(double omega);

/// One gradient per meta label, all of the same length.
struct GradientBundle {
  std::vector<Vec> grads;

  std::size_t labels() const { return grads.size(); }
  std::size_t dim() const { return grads.empty() ? 0 : grads.front().size(); }
  Vec norms() const;
  /// Throws DimensionError on ragged or empty bundles and Error on non-finite entries.
  void validate() const;
};

/// Injection weight μ. Throws TargetDegenerateError when |omega_hat| >= 1 - 1e-9
/// and DegenerateVectorError on zero norms.
double injection_weight(double gi_norm, double gj_norm, double omega, double omega_hat);

/// g_i + μ g_j.
Vec inject(ConstSpan gi, ConstSpan gj, double omega, double omega_hat);

struct MitigatorState {
  std::size_t labels = 0;
  Mat omega_hat;  // labels x labels, diagonal unused
  double beta = 1e-2;
  std::uint64_t t = 0;

  static MitigatorState fresh(std::size_t labels, double beta);
  bool operator==(const MitigatorState&) const = default;
};

/// ω̂_ij <- (1-β) ω̂_ij + β ω, returning the new value.
double ema_update(MitigatorState& state, std::size_t i, std::size_t j, double omega);

struct PairRecord {
  std::size_t segment = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  double omega = 0.0;      // cosine(g'_i before this pair, g_j)
  double omega_hat = 0.0;  // target after the EMA update
  Relationship relation = Relationship::kSlightlyConflicting;
  bool fired = false;
  bool skipped = false;
  double post_cosine = 0.0;  // cosine(g'_i after this pair, g_j); meaningful if fired
  std::string note;          // reason when skipped
};

struct ConflictReport {
  std::uint64_t step = 0;
  std::vector<PairRecord> pairs;
  std::size_t conflicting_pairs = 0;  // pairs with ω < 0
  std::size_t fired = 0;
};

struct MitigateResult {
  Vec direction;              // (1/M) Σ g'_i
  std::vector<Vec> modified;  // g'_i
  ConflictReport report;
};

/// Runs one mitigation pass. Advances `state` (EMA targets and t); the bundle
/// itself is never modified.
MitigateResult mitigate(const GradientBundle& bundle, MitigatorState& state);

/// Contiguous slice [offset, offset + length) of the flat parameter vector.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Mitigation applied independently per parameter segment, each with its own
/// state. Segments must tile the gradient exactly.
MitigateResult mitigate_segmented(const GradientBundle& bundle, std::span<const Segment> segments,
                                  std::vector<MitigatorState>& states);

/// Plain mean of the bundle.
Vec average(const GradientBundle& bundle);

}  // namespace gcl
