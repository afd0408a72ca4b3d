#include "gcl/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "gcl/errors.hpp"
#include "gcl/seed.hpp"

namespace gcl {

namespace {

// fold[k] for every sample, stratified by label.
std::vector<std::size_t> assign_folds(const std::vector<int>& labels, std::size_t folds,
                                      std::uint64_t seed, std::uint64_t tag) {
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = seed::rng(seed, {seed::kProbe, tag});
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
  std::vector<std::size_t> fold(labels.size());
  for (std::size_t r = 0; r < order.size(); ++r) fold[order[r]] = r % folds;
  return fold;
}

struct SoftmaxModel {
  std::size_t classes = 0;
  std::size_t dim = 0;
  Vec mean;
  Vec scale;
  Vec weights;  // classes x (dim + 1), last column bias

  int predict(ConstSpan x) const {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) {
      const double* w = weights.data() + c * (dim + 1);
      double s = w[dim];
      for (std::size_t k = 0; k < dim; ++k) s += w[k] * (x[k] - mean[k]) / scale[k];
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(c);
      }
    }
    return best;
  }
};

SoftmaxModel fit_softmax(const std::vector<const Vec*>& xs, const std::vector<int>& ys,
                         std::size_t classes, const ProbeConfig& config) {
  SoftmaxModel m;
  m.classes = classes;
  m.dim = xs.front()->size();
  const std::size_t n = xs.size();
  const std::size_t d = m.dim;
  m.mean.assign(d, 0.0);
  m.scale.assign(d, 0.0);
  for (const Vec* x : xs) axpy(1.0 / static_cast<double>(n), *x, m.mean);
  for (const Vec* x : xs) {
    for (std::size_t k = 0; k < d; ++k) m.scale[k] += ((*x)[k] - m.mean[k]) * ((*x)[k] - m.mean[k]);
  }
  for (double& s : m.scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 1e-12)) s = 1.0;
  }
  Mat x(n, d + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) x(i, k) = ((*xs[i])[k] - m.mean[k]) / m.scale[k];
    x(i, d) = 1.0;
  }

  Mat w(classes, d + 1);
  Mat grad(classes, d + 1);
  Vec prob(classes);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    std::fill(grad.data().begin(), grad.data().end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < classes; ++c) {
        prob[c] = dot(w.row(c), x.row(i));
        mx = std::max(mx, prob[c]);
      }
      double sum = 0.0;
      for (double& p : prob) {
        p = std::exp(p - mx);
        sum += p;
      }
      for (std::size_t c = 0; c < classes; ++c) {
        const double coeff = prob[c] / sum - (static_cast<int>(c) == ys[i] ? 1.0 : 0.0);
        axpy(coeff / static_cast<double>(n), x.row(i), grad.row(c));
      }
    }
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t k = 0; k < d; ++k) grad(c, k) += config.l2 * w(c, k);
    }
    axpy(-config.step_size, grad.data(), w.data());
  }
  m.weights = std::move(w.data());
  return m;
}

double entropy(const std::map<int, std::size_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

double squared_distance(ConstSpan a, ConstSpan b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

}  // namespace

double linear_probe_accuracy(const std::vector<Vec>& features, const std::vector<int>& labels,
                             std::size_t classes, const ProbeConfig& config,
                             std::vector<double>* fold_accuracy, std::size_t* failed) {
  if (features.size() != labels.size() || features.empty()) {
    throw DimensionError("linear probe: features and labels differ in length");
  }
  if (config.folds < 2) throw ConfigError("linear probe: need at least 2 folds");
  const std::vector<std::size_t> fold = assign_folds(labels, config.folds, config.seed, 1);
  double total = 0.0;
  std::size_t used = 0;
  std::size_t bad = 0;
  for (std::size_t f = 0; f < config.folds; ++f) {
    std::vector<const Vec*> xs;
    std::vector<int> ys;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (fold[i] != f) {
        xs.push_back(&features[i]);
        ys.push_back(labels[i]);
      }
    }
    std::vector<int> distinct = ys;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2 || xs.size() == features.size()) {
      ++bad;
      continue;
    }
    const SoftmaxModel model = fit_softmax(xs, ys, classes, config);
    if (!std::all_of(model.weights.begin(), model.weights.end(), [](double v) { return std::isfinite(v); })) {
      ++bad;
      continue;
    }
    std::size_t correct = 0;
    std::size_t tested = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (fold[i] != f) continue;
      ++tested;
      correct += model.predict(features[i]) == labels[i] ? 1 : 0;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(tested);
    if (fold_accuracy) fold_accuracy->push_back(acc);
    total += acc;
    ++used;
  }
  if (failed) *failed = bad;
  return used == 0 ? 0.0 : total / static_cast<double>(used);
}

double nearest_centroid_accuracy(const std::vector<Mat>& rows_per_image,
                                 const std::vector<std::vector<int>>& labels_per_image,
                                 std::size_t classes, const ProbeConfig& config) {
  const std::size_t images = rows_per_image.size();
  if (images < 2 || labels_per_image.size() != images) {
    throw DimensionError("pixel probe: need at least two images with labels");
  }
  const std::size_t dim = rows_per_image.front().cols();
  std::vector<int> image_key(images, 0);
  const std::vector<std::size_t> fold = assign_folds(image_key, std::min(config.folds, images),
                                                     config.seed, 2);
  const std::size_t folds = std::min(config.folds, images);
  std::size_t correct = 0;
  std::size_t tested = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    Mat centroid(classes, dim);
    std::vector<std::size_t> count(classes, 0);
    for (std::size_t i = 0; i < images; ++i) {
      if (fold[i] == f) continue;
      for (std::size_t r = 0; r < rows_per_image[i].rows(); ++r) {
        const auto c = static_cast<std::size_t>(labels_per_image[i][r]);
        axpy(1.0, rows_per_image[i].row(r), centroid.row(c));
        ++count[c];
      }
    }
    for (std::size_t c = 0; c < classes; ++c) {
      if (count[c] > 0) scale_inplace(1.0 / static_cast<double>(count[c]), centroid.row(c));
    }
    for (std::size_t i = 0; i < images; ++i) {
      if (fold[i] != f) continue;
      for (std::size_t r = 0; r < rows_per_image[i].rows(); ++r) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < classes; ++c) {
          if (count[c] == 0) continue;
          const double d = squared_distance(rows_per_image[i].row(r), centroid.row(c));
          if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
          }
        }
        ++tested;
        correct += best == labels_per_image[i][r] ? 1 : 0;
      }
    }
  }
  return tested == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(tested);
}

double normalized_mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw DimensionError("nmi: length mismatch");
  const double n = static_cast<double>(a.size());
  std::map<int, std::size_t> ca;
  std::map<int, std::size_t> cb;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++joint[{a[i], b[i]}];
  }
  const double ha = entropy(ca, n);
  const double hb = entropy(cb, n);
  if (ha + hb == 0.0) return 1.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pxy = static_cast<double>(c) / n;
    const double px = static_cast<double>(ca[key.first]) / n;
    const double py = static_cast<double>(cb[key.second]) / n;
    mi += pxy * std::log(pxy / (px * py));
  }
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

std::vector<int> kmeans(const std::vector<Vec>& points, std::size_t k, std::uint64_t seed,
                        std::size_t restarts, std::size_t iterations) {
  const std::size_t n = points.size();
  if (n == 0 || k == 0) throw DimensionError("kmeans: empty input");
  k = std::min(k, n);
  std::vector<int> best_assign(n, 0);
  double best_inertia = std::numeric_limits<double>::infinity();

  for (std::size_t run = 0; run < std::max<std::size_t>(restarts, 1); ++run) {
    auto rng = seed::rng(seed, {seed::kProbe, 3, run});
    std::vector<Vec> centers;
    centers.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
    Vec d2(n);
    while (centers.size() < k) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (const Vec& c : centers) m = std::min(m, squared_distance(points[i], c));
        d2[i] = m;
        total += m;
      }
      std::size_t pick = 0;
      if (total > 0.0) {
        double r = std::uniform_real_distribution<double>(0.0, total)(rng);
        for (pick = 0; pick + 1 < n; ++pick) {
          r -= d2[pick];
          if (r <= 0.0) break;
        }
      } else {
        pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      }
      centers.push_back(points[pick]);
    }

    std::vector<int> assign(n, -1);
    double inertia = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
      bool changed = false;
      inertia = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
          const double d = squared_distance(points[i], centers[c]);
          if (d < bd) {
            bd = d;
            best = static_cast<int>(c);
          }
        }
        inertia += bd;
        if (assign[i] != best) {
          assign[i] = best;
          changed = true;
        }
      }
      if (!changed) break;
      std::vector<Vec> sums(k, Vec(points[0].size(), 0.0));
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        axpy(1.0, points[i], sums[static_cast<std::size_t>(assign[i])]);
        ++counts[static_cast<std::size_t>(assign[i])];
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        scale_inplace(1.0 / static_cast<double>(counts[c]), sums[c]);
        centers[c] = std::move(sums[c]);
      }
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_assign = assign;
    }
  }
  return best_assign;
}

Embeddings embed(const EncoderParams& params, const Dataset& data) {
  Embeddings out;
  out.image.reserve(data.size());
  out.pixels.reserve(data.size());
  for (const SyntheticImage& img : data.images) {
    ForwardResult fr = forward(params, img.pixels, false);
    out.image.push_back(std::move(fr.reps.image));
    out.pixels.push_back(std::move(fr.reps.pix));
  }
  return out;
}

ProbeScores probe(const EncoderParams& params, const Dataset& data, const ProbeConfig& config) {
  const Embeddings emb = embed(params, data);
  std::vector<int> image_class;
  std::vector<std::vector<int>> pixel_class;
  for (const SyntheticImage& img : data.images) {
    image_class.push_back(img.image_class);
    pixel_class.push_back(img.latent);
  }
  ProbeScores s;
  s.linear_accuracy = linear_probe_accuracy(emb.image, image_class, data.spec.image_classes(),
                                            config, &s.fold_accuracy, &s.failed_folds);
  s.pixel_accuracy =
      nearest_centroid_accuracy(emb.pixels, pixel_class, data.spec.pixel_classes(), config);
  const std::vector<int> clusters = kmeans(emb.image, data.spec.image_classes(), config.seed,
                                           config.kmeans_restarts, config.kmeans_iterations);
  s.nmi = normalized_mutual_information(clusters, image_class);
  return s;
}

}  // namespace gcl
