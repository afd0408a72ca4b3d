#include "gcl/mitigator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gcl/errors.hpp"

namespace gcl {

namespace {

constexpr double kUnitTolerance = 1e-12;
constexpr double kTargetLimit = 1.0 - 1e-9;

}  // namespace

std::string_view relationship_name(Relationship r) {
  switch (r) {
    case Relationship::kNonConflicting:
      return "non-conflicting";
    case Relationship::kSlightlyConflicting:
      return "slightly-conflicting";
    case Relationship::kConflicting:
      return "conflicting";
  }
  return "unknown";
}

Relationship classify(double omega) {
  if (std::abs(omega - 1.0) <= kUnitTolerance) return Relationship::kNonConflicting;
  if (omega >= 0.0) return Relationship::kSlightlyConflicting;
  return Relationship::kConflicting;
}

Vec GradientBundle::norms() const {
  Vec out;
  out.reserve(grads.size());
  for (const Vec& g : grads) out.push_back(norm(g));
  return out;
}

void GradientBundle::validate() const {
  if (grads.empty()) throw DimensionError("GradientBundle: no gradients");
  for (const Vec& g : grads) {
    if (g.size() != grads.front().size()) throw DimensionError("GradientBundle: ragged gradients");
    for (double v : g) {
      if (!std::isfinite(v)) throw Error("GradientBundle: non-finite gradient entry");
    }
  }
}

double injection_weight(double gi_norm, double gj_norm, double omega, double omega_hat) {
  if (std::abs(omega_hat) >= kTargetLimit) {
    throw TargetDegenerateError("inject: |target cosine| too close to 1");
  }
  if (gi_norm == 0.0 || gj_norm == 0.0) throw DegenerateVectorError("inject: zero-norm gradient");
  const double sin_now = std::sqrt(std::max(0.0, 1.0 - omega * omega));
  const double sin_target = std::sqrt(1.0 - omega_hat * omega_hat);
  return gi_norm * (omega_hat * sin_now - omega * sin_target) / (gj_norm * sin_target);
}

Vec inject(ConstSpan gi, ConstSpan gj, double omega, double omega_hat) {
  if (gi.size() != gj.size()) throw DimensionError("inject: length mismatch");
  const double mu = injection_weight(norm(gi), norm(gj), omega, omega_hat);
  Vec out(gi.begin(), gi.end());
  axpy(mu, gj, out);
  return out;
}

MitigatorState MitigatorState::fresh(std::size_t labels, double beta) {
  MitigatorState s;
  s.labels = labels;
  s.omega_hat = Mat(labels, labels, 0.0);
  s.beta = beta;
  s.t = 0;
  return s;
}

double ema_update(MitigatorState& state, std::size_t i, std::size_t j, double omega) {
  double& w = state.omega_hat(i, j);
  w = (1.0 - state.beta) * w + state.beta * omega;
  return w;
}

MitigateResult mitigate(const GradientBundle& bundle, MitigatorState& state) {
  bundle.validate();
  const std::size_t m = bundle.labels();
  if (state.labels != m || state.omega_hat.rows() != m) {
    throw DimensionError("mitigate: state has " + std::to_string(state.labels) +
                         " labels, bundle has " + std::to_string(m));
  }
  const Vec norms = bundle.norms();

  MitigateResult out;
  out.report.step = state.t;
  out.direction.assign(bundle.dim(), 0.0);
  out.modified.reserve(m);

  for (std::size_t i = 0; i < m; ++i) {
    Vec gp = bundle.grads[i];
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      PairRecord rec;
      rec.i = i;
      rec.j = j;
      const double gp_norm = norm(gp);
      if (norms[j] == 0.0 || gp_norm == 0.0) {
        rec.skipped = true;
        rec.note = norms[j] == 0.0 ? "zero-norm g_j" : "zero-norm g'_i";
        rec.omega_hat = state.omega_hat(i, j);
        out.report.pairs.push_back(std::move(rec));
        continue;
      }
      rec.omega = cosine(gp, bundle.grads[j]);
      rec.relation = classify(rec.omega);
      if (rec.relation == Relationship::kConflicting) ++out.report.conflicting_pairs;
      rec.omega_hat = ema_update(state, i, j, rec.omega);
      if (rec.omega < rec.omega_hat) {
        try {
          const double mu = injection_weight(gp_norm, norms[j], rec.omega, rec.omega_hat);
          axpy(mu, bundle.grads[j], gp);
          rec.fired = true;
          ++out.report.fired;
          rec.post_cosine = norm(gp) > 0.0 ? cosine(gp, bundle.grads[j]) : 0.0;
          if (norm(gp) == 0.0) rec.note = "injection produced a zero vector";
        } catch (const TargetDegenerateError&) {
          rec.skipped = true;
          rec.note = "target cosine degenerate";
        }
      }
      out.report.pairs.push_back(std::move(rec));
    }
    axpy(1.0 / static_cast<double>(m), gp, out.direction);
    out.modified.push_back(std::move(gp));
  }
  ++state.t;
  return out;
}

MitigateResult mitigate_segmented(const GradientBundle& bundle, std::span<const Segment> segments,
                                  std::vector<MitigatorState>& states) {
  bundle.validate();
  if (states.size() != segments.size()) throw DimensionError("mitigate_segmented: state count");
  std::size_t covered = 0;
  for (const Segment& s : segments) {
    if (s.offset != covered) throw DimensionError("mitigate_segmented: segments must tile");
    covered += s.length;
  }
  if (covered != bundle.dim()) throw DimensionError("mitigate_segmented: segments must tile");

  MitigateResult out;
  out.report.step = states.empty() ? 0 : states.front().t;
  out.direction.assign(bundle.dim(), 0.0);
  out.modified.assign(bundle.labels(), Vec(bundle.dim(), 0.0));
  for (std::size_t s = 0; s < segments.size(); ++s) {
    GradientBundle part;
    for (const Vec& g : bundle.grads) {
      part.grads.emplace_back(g.begin() + static_cast<std::ptrdiff_t>(segments[s].offset),
                              g.begin() + static_cast<std::ptrdiff_t>(segments[s].offset +
                                                                      segments[s].length));
    }
    MitigateResult r = mitigate(part, states[s]);
    std::copy(r.direction.begin(), r.direction.end(),
              out.direction.begin() + static_cast<std::ptrdiff_t>(segments[s].offset));
    for (std::size_t i = 0; i < bundle.labels(); ++i) {
      std::copy(r.modified[i].begin(), r.modified[i].end(),
                out.modified[i].begin() + static_cast<std::ptrdiff_t>(segments[s].offset));
    }
    for (PairRecord& rec : r.report.pairs) {
      rec.segment = s;
      out.report.pairs.push_back(std::move(rec));
    }
    out.report.conflicting_pairs += r.report.conflicting_pairs;
    out.report.fired += r.report.fired;
  }
  return out;
}

Vec average(const GradientBundle& bundle) {
  bundle.validate();
  Vec out(bundle.dim(), 0.0);
  const double w = 1.0 / static_cast<double>(bundle.labels());
  for (const Vec& g : bundle.grads) axpy(w, g, out);
  return out;
}

}  // namespace gcl
