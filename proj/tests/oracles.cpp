#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oracle {

double naive_dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

double image_loss(const std::vector<Vec>& z, const std::vector<std::vector<std::size_t>>& positives,
                  double tau) {
  const std::size_t n = z.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(naive_dot(z[i].data(), z[a].data(), z[i].size()) / tau);
    }
    double anchor = 0.0;
    for (std::size_t j : positives[i]) {
      const double num = std::exp(naive_dot(z[i].data(), z[j].data(), z[i].size()) / tau);
      anchor += -std::log(num / denom);
    }
    total += anchor / static_cast<double>(positives[i].size());
  }
  return total / static_cast<double>(n);
}

double pixel_loss(const Mat& ui, const Mat& uj, const std::vector<gcl::PixelPairing>& pairings,
                  double tau) {
  const std::size_t d = ui.cols();
  double total = 0.0;
  for (const auto& pr : pairings) {
    const double* u = ui.data().data() + pr.anchor * d;
    double neg = 0.0;
    for (std::size_t n : pr.negatives) neg += std::exp(naive_dot(u, uj.data().data() + n * d, d) / tau);
    double anchor = 0.0;
    for (std::size_t p : pr.positives) {
      const double num = std::exp(naive_dot(u, uj.data().data() + p * d, d) / tau);
      anchor += -std::log(num / (num + neg));
    }
    total += anchor / static_cast<double>(pr.positives.size());
  }
  return total / static_cast<double>(pairings.size());
}

std::vector<std::vector<std::size_t>> positive_sets(const std::vector<std::size_t>& source,
                                                    const std::vector<std::vector<int>>& meta,
                                                    int meta_index) {
  std::vector<std::vector<std::size_t>> out(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    for (std::size_t j = 0; j < source.size(); ++j) {
      if (i == j) continue;
      const bool same_source = source[i] == source[j];
      const bool same_meta = meta_index >= 0 && meta[i][meta_index] == meta[j][meta_index];
      if (same_source || same_meta) out[i].push_back(j);
    }
  }
  return out;
}

MitigationTrace mitigate(const std::vector<Vec>& grads, Mat omega_hat, double beta) {
  const std::size_t m = grads.size();
  const std::size_t d = grads[0].size();
  MitigationTrace tr;
  tr.direction.assign(d, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    Vec gp = grads[i];
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      const double ni = std::sqrt(naive_dot(gp.data(), gp.data(), d));
      const double nj = std::sqrt(naive_dot(grads[j].data(), grads[j].data(), d));
      double w = naive_dot(gp.data(), grads[j].data(), d) / (ni * nj);
      w = std::min(1.0, std::max(-1.0, w));
      omega_hat(i, j) = (1.0 - beta) * omega_hat(i, j) + beta * w;
      const double wh = omega_hat(i, j);
      tr.omegas.push_back(w);
      tr.targets.push_back(wh);
      const bool fire = w < wh;
      tr.fired.push_back(fire);
      if (fire) {
        const double mu =
            ni * (wh * std::sqrt(1.0 - w * w) - w * std::sqrt(1.0 - wh * wh)) /
            (nj * std::sqrt(1.0 - wh * wh));
        for (std::size_t k = 0; k < d; ++k) gp[k] += mu * grads[j][k];
      }
    }
    for (std::size_t k = 0; k < d; ++k) tr.direction[k] += gp[k] / static_cast<double>(m);
    tr.modified.push_back(gp);
  }
  tr.omega_hat = omega_hat;
  return tr;
}

std::vector<std::size_t> top_k(const std::vector<double>& row, std::size_t k) {
  std::vector<std::size_t> idx(row.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  idx.resize(k);
  return idx;
}

std::vector<std::size_t> lowest_k(const std::vector<double>& scores,
                                  const std::vector<double>& affinity,
                                  const std::vector<std::size_t>& index, std::size_t k) {
  std::vector<std::size_t> pos(scores.size());
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  std::sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    if (affinity[a] != affinity[b]) return affinity[a] > affinity[b];
    return index[a] < index[b];
  });
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < k; ++r) out.push_back(index[pos[r]]);
  return out;
}

Vec random_vec(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Vec v(n);
  for (double& x : v) x = g(rng);
  return v;
}

Vec random_unit(std::mt19937_64& rng, std::size_t n) {
  Vec v = random_vec(rng, n);
  const double s = std::sqrt(naive_dot(v.data(), v.data(), n));
  for (double& x : v) x /= s;
  return v;
}

Mat random_unit_rows(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  Mat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    Vec v = random_unit(rng, cols);
    std::copy(v.begin(), v.end(), m.row(r).begin());
  }
  return m;
}

}  // namespace oracle
