#include "gcl/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gcl/errors.hpp"
#include "gcl/losses.hpp"

namespace gcl {

void PaceConfig::validate() const {
  if (total_steps < 1) throw ConfigError("pace: total steps must be >= 1");
  if (!(pool_fraction > 0.0 && pool_fraction <= 1.0)) {
    throw ConfigError("pace: pool fraction must lie in (0, 1]");
  }
}

std::size_t pool_size_for(std::size_t pixels, double pool_fraction) {
  if (!(pool_fraction > 0.0 && pool_fraction <= 1.0)) {
    throw ConfigError("pool fraction must lie in (0, 1]");
  }
  // The slack keeps products such as 0.3 * 10 = 3.0000000000000004 from
  // rounding up to the next integer.
  const double raw = pool_fraction * static_cast<double>(pixels);
  const auto size = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(size, 1, std::max<std::size_t>(pixels, 1));
}

std::vector<std::size_t> build_pool(ConstSpan affinity_row, double pool_fraction) {
  const std::size_t k = pool_size_for(affinity_row.size(), pool_fraction);
  std::vector<std::size_t> order(affinity_row.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (affinity_row[a] != affinity_row[b]) return affinity_row[a] > affinity_row[b];
                      return a < b;
                    });
  order.resize(k);
  return order;
}

std::vector<std::size_t> pool_complement(std::size_t len, std::span<const std::size_t> pool) {
  std::vector<bool> in_pool(len, false);
  for (std::size_t p : pool) in_pool.at(p) = true;
  std::vector<std::size_t> out;
  out.reserve(len - pool.size());
  for (std::size_t v = 0; v < len; ++v) {
    if (!in_pool[v]) out.push_back(v);
  }
  return out;
}

double pace_raw(std::uint64_t t, std::uint64_t total_steps, std::size_t pool_size) {
  if (total_steps < 1) throw ConfigError("pace: total steps must be >= 1");
  const double progress = static_cast<double>(t) / static_cast<double>(total_steps);
  return (1.0 + 0.25 * std::log(progress + std::exp(-4.0))) * static_cast<double>(pool_size);
}

std::size_t pace_size(std::uint64_t t, std::uint64_t total_steps, std::size_t pool_size) {
  if (pool_size == 0) return 0;
  const double rounded = std::round(pace_raw(t, total_steps, pool_size));
  if (rounded < 1.0) return 1;
  return std::min(pool_size, static_cast<std::size_t>(rounded));
}

double score_positive(const EncoderParams& params, const RepresentationSet& anchor_reps,
                      const ForwardTrace& anchor_trace, std::size_t anchor,
                      const Mat& partner_pix, std::size_t positive,
                      std::span<const std::size_t> negatives, double tau, ScoreLayers layers) {
  if (anchor >= anchor_reps.pix.rows()) throw ContractError("score_positive: anchor out of range");
  const std::size_t single[] = {positive};
  const Vec du = anchor_gradient(anchor_reps.pix.row(anchor), partner_pix, single, negatives, tau);
  return pixel_weight_grad_norm(params, anchor_reps, anchor_trace, anchor, du, layers);
}

std::vector<std::size_t> screen(std::span<ScoredCandidate> pool, std::uint64_t t,
                                std::uint64_t total_steps) {
  const std::size_t take = pace_size(t, total_steps, pool.size());
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const ScoredCandidate& x = pool[a];
    const ScoredCandidate& y = pool[b];
    if (x.score != y.score) return x.score < y.score;
    if (x.affinity != y.affinity) return x.affinity > y.affinity;
    return x.index < y.index;
  });
  std::vector<std::size_t> admitted;
  admitted.reserve(take);
  for (ScoredCandidate& c : pool) c.admitted = false;
  for (std::size_t k = 0; k < take; ++k) {
    pool[order[k]].admitted = true;
    admitted.push_back(pool[order[k]].index);
  }
  return admitted;
}

}  // namespace gcl
