#include "gcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gcl/errors.hpp"

namespace gcl {

namespace {

void require_tau(double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
}

// log(exp(a) + exp(b)) without overflow
double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

PositiveIndexSet build_positive_sets(const BatchLabels& labels,
                                     std::optional<std::size_t> meta_index) {
  const std::size_t n = labels.size();
  PositiveIndexSet out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      bool positive = labels.source_id[i] == labels.source_id[j];
      if (!positive && meta_index) {
        positive = labels.meta[i].at(*meta_index) == labels.meta[j].at(*meta_index);
      }
      if (positive) out[i].push_back(j);
    }
  }
  return out;
}

ImageLossResult image_loss(std::span<const Vec> z, const PositiveIndexSet& positives, double tau) {
  require_tau(tau);
  const std::size_t n = z.size();
  if (positives.size() != n) throw DimensionError("image_loss: positive sets do not match batch");
  ImageLossResult out;
  out.grad.assign(n, Vec(n == 0 ? 0 : z[0].size(), 0.0));
  if (n < 2) return out;

  const double inv_n = 1.0 / static_cast<double>(n);
  Vec logits(n);
  Vec coeff(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pos = positives[i];
    if (pos.empty()) {
      throw ContractError("image_loss: anchor " + std::to_string(i) + " has no positive");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      logits[a] = dot(z[i], z[a]) / tau;
      mx = std::max(mx, logits[a]);
    }
    double sum = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) sum += std::exp(logits[a] - mx);
    }
    const double lse = mx + std::log(sum);

    const double inv_pos = 1.0 / static_cast<double>(pos.size());
    double pos_mean = 0.0;
    for (std::size_t j : pos) pos_mean += logits[j];
    out.loss += (lse - pos_mean * inv_pos) * inv_n;

    // dL_i/ds_a = softmax_a - [a ∈ P]/|P|
    for (std::size_t a = 0; a < n; ++a) coeff[a] = a == i ? 0.0 : std::exp(logits[a] - lse);
    for (std::size_t j : pos) coeff[j] -= inv_pos;
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      const double c = coeff[a] * inv_n / tau;
      axpy(c, z[a], out.grad[i]);
      axpy(c, z[i], out.grad[a]);
    }
  }
  return out;
}

Vec anchor_softmax(std::span<const Vec> z, std::size_t anchor, double tau) {
  require_tau(tau);
  const std::size_t n = z.size();
  Vec w(n, 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n; ++a) {
    if (a == anchor) continue;
    w[a] = dot(z[anchor], z[a]) / tau;
    mx = std::max(mx, w[a]);
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (a == anchor) continue;
    w[a] = std::exp(w[a] - mx);
    sum += w[a];
  }
  for (double& v : w) v /= sum;
  return w;
}

Mat pixel_affinity(const Mat& zi, const Mat& zj) {
  if (zi.cols() != zj.cols()) throw DimensionError("pixel_affinity: feature widths differ");
  Vec ni(zi.rows());
  Vec nj(zj.rows());
  for (std::size_t r = 0; r < zi.rows(); ++r) ni[r] = norm(zi.row(r));
  for (std::size_t r = 0; r < zj.rows(); ++r) nj[r] = norm(zj.row(r));
  if (std::find(ni.begin(), ni.end(), 0.0) != ni.end() ||
      std::find(nj.begin(), nj.end(), 0.0) != nj.end()) {
    throw DegenerateVectorError("pixel_affinity: zero-norm pixel feature");
  }
  Mat a = matmul_nt(zi, zj);
  for (std::size_t u = 0; u < a.rows(); ++u) {
    for (std::size_t v = 0; v < a.cols(); ++v) {
      a(u, v) = std::clamp(a(u, v) / (ni[u] * nj[v]), -1.0, 1.0);
    }
  }
  return a;
}

PixelLossResult pixel_loss(const Mat& ui, const Mat& uj, std::span<const PixelPairing> pairings,
                           double tau) {
  require_tau(tau);
  if (ui.cols() != uj.cols()) throw DimensionError("pixel_loss: representation widths differ");
  if (pairings.empty()) throw ContractError("pixel_loss: no anchors");

  PixelLossResult out{0.0, Mat(ui.rows(), ui.cols()), Mat(uj.rows(), uj.cols())};
  const double inv_anchors = 1.0 / static_cast<double>(pairings.size());
  Vec neg_logits;

  for (const PixelPairing& pr : pairings) {
    if (pr.positives.empty()) throw ContractError("pixel_loss: anchor has no selected positive");
    if (pr.anchor >= ui.rows()) throw DimensionError("pixel_loss: anchor index out of range");
    ConstSpan u = ui.row(pr.anchor);

    neg_logits.resize(pr.negatives.size());
    double neg_max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pr.negatives.size(); ++k) {
      neg_logits[k] = dot(u, uj.row(pr.negatives[k])) / tau;
      neg_max = std::max(neg_max, neg_logits[k]);
    }
    double neg_lse = -std::numeric_limits<double>::infinity();
    if (!pr.negatives.empty()) {
      double s = 0.0;
      for (double l : neg_logits) s += std::exp(l - neg_max);
      neg_lse = neg_max + std::log(s);
    }

    const double w = inv_anchors / static_cast<double>(pr.positives.size());
    MutSpan du = out.d_anchor_image.row(pr.anchor);
    for (std::size_t p : pr.positives) {
      ConstSpan up = uj.row(p);
      const double sp = dot(u, up) / tau;
      const double lse = log_add(sp, neg_lse);
      out.loss += (lse - sp) * w;

      const double cp = (std::exp(sp - lse) - 1.0) * w / tau;
      axpy(cp, up, du);
      axpy(cp, u, out.d_partner_image.row(p));
      for (std::size_t k = 0; k < pr.negatives.size(); ++k) {
        const double cn = std::exp(neg_logits[k] - lse) * w / tau;
        axpy(cn, uj.row(pr.negatives[k]), du);
        axpy(cn, u, out.d_partner_image.row(pr.negatives[k]));
      }
    }
  }
  return out;
}

Vec anchor_gradient(ConstSpan u, const Mat& partner, std::span<const std::size_t> positives,
                    std::span<const std::size_t> negatives, double tau) {
  require_tau(tau);
  if (positives.empty()) throw ContractError("anchor_gradient: no selected positive");
  if (u.size() != partner.cols()) throw DimensionError("anchor_gradient: width mismatch");
  Vec grad(u.size(), 0.0);
  if (negatives.empty()) return grad;

  Vec neg_logits(negatives.size());
  for (std::size_t k = 0; k < negatives.size(); ++k) {
    neg_logits[k] = dot(u, partner.row(negatives[k])) / tau;
  }
  const double neg_max = *std::max_element(neg_logits.begin(), neg_logits.end());
  double s = 0.0;
  for (double l : neg_logits) s += std::exp(l - neg_max);
  const double neg_lse = neg_max + std::log(s);

  Vec diff(u.size());
  const double scale = -1.0 / (tau * static_cast<double>(positives.size()));
  for (std::size_t p : positives) {
    ConstSpan up = partner.row(p);
    const double lse = log_add(dot(u, up) / tau, neg_lse);
    for (std::size_t k = 0; k < negatives.size(); ++k) {
      ConstSpan un = partner.row(negatives[k]);
      for (std::size_t c = 0; c < u.size(); ++c) diff[c] = up[c] - un[c];
      axpy(scale * std::exp(neg_logits[k] - lse), diff, grad);
    }
  }
  return grad;
}

JointLoss gcl_loss(std::span<const MetaLoss> terms) {
  JointLoss out;
  out.per_meta.reserve(terms.size());
  for (const MetaLoss& t : terms) {
    out.per_meta.push_back(t.image + t.pixel);
    out.total += t.image + t.pixel;
  }
  return out;
}

}  // namespace gcl
