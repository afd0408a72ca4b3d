#include "gcl/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "gcl/errors.hpp"
#include "gcl/seed.hpp"

namespace gcl {

namespace {

constexpr double kContradictionTolerance = 0.05;
constexpr double kContradictionGoal = 0.005;

Mat draw_class_means(const SynthSpec& spec, std::uint64_t seed) {
  auto rng = seed::rng(seed, {seed::kDataMeans});
  std::uniform_real_distribution<double> coord(-spec.mean_range, spec.mean_range);
  const std::size_t classes = spec.pixel_classes();
  Mat means(classes, spec.feature_dim);
  for (std::size_t c = 0; c < classes; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < 100000 && !placed; ++attempt) {
      for (double& v : means.row(c)) v = coord(rng);
      placed = true;
      for (std::size_t prev = 0; prev < c && placed; ++prev) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < spec.feature_dim; ++k) {
          const double diff = means(c, k) - means(prev, k);
          d2 += diff * diff;
        }
        placed = std::sqrt(d2) >= spec.min_mean_distance;
      }
    }
    if (!placed) throw ConfigError("generate: cannot place class means at the requested distance");
  }
  return means;
}

// Rectangle of 2..4 x 2..4 cells inside columns [col0, col0 + cols).
void paint_object(std::vector<int>& latent, const SynthSpec& spec, std::size_t col0,
                  std::size_t cols, int cls, std::mt19937_64& rng) {
  const std::size_t max_h = std::min<std::size_t>(4, spec.height);
  const std::size_t max_w = std::min<std::size_t>(4, cols);
  const std::size_t min_h = std::min<std::size_t>(2, max_h);
  const std::size_t min_w = std::min<std::size_t>(2, max_w);
  const std::size_t h = std::uniform_int_distribution<std::size_t>(min_h, max_h)(rng);
  const std::size_t w = std::uniform_int_distribution<std::size_t>(min_w, max_w)(rng);
  const std::size_t r0 = std::uniform_int_distribution<std::size_t>(0, spec.height - h)(rng);
  const std::size_t c0 = col0 + std::uniform_int_distribution<std::size_t>(0, cols - w)(rng);
  for (std::size_t r = r0; r < r0 + h; ++r) {
    for (std::size_t c = c0; c < c0 + w; ++c) latent[r * spec.width + c] = cls;
  }
}

std::size_t xor_count_for(const std::vector<int>& reference, const std::vector<int>& labels,
                          std::size_t k, int candidate) {
  std::size_t count = 0;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    if (l == k) continue;
    const bool same_ref = reference[k] == reference[l];
    const bool same = candidate == labels[l];
    count += same_ref != same ? 1 : 0;
  }
  return count;
}

// Greedy relabeling of a copy of `reference` until its pairwise
// disagreement rate with `reference` reaches `target`.
std::vector<int> corrupt_labels(const std::vector<int>& reference, int classes, double target,
                                std::uint64_t seed) {
  std::vector<int> labels = reference;
  if (target == 0.0) return labels;
  const std::size_t n = labels.size();
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  std::size_t disagree = 0;  // currently 0: labels equal reference

  auto rng = seed::rng(seed, {seed::kDataLabels, 1});
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int pass = 0; pass < 20; ++pass) {
    std::shuffle(order.begin(), order.end(), rng);
    bool changed = false;
    for (std::size_t k : order) {
      const double now = static_cast<double>(disagree) / pairs;
      if (std::abs(now - target) <= kContradictionGoal) return labels;
      const std::size_t current = xor_count_for(reference, labels, k, labels[k]);
      int best = labels[k];
      double best_gap = std::abs(now - target);
      std::size_t best_count = current;
      // Random start so ties do not always favour class 0.
      const int start = std::uniform_int_distribution<int>(0, classes - 1)(rng);
      for (int step = 0; step < classes; ++step) {
        const int c = (start + step) % classes;
        if (c == labels[k]) continue;
        const std::size_t cnt = xor_count_for(reference, labels, k, c);
        const double rate = static_cast<double>(disagree - current + cnt) / pairs;
        if (std::abs(rate - target) < best_gap) {
          best_gap = std::abs(rate - target);
          best = c;
          best_count = cnt;
        }
      }
      if (best != labels[k]) {
        disagree = disagree - current + best_count;
        labels[k] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return labels;
}

}  // namespace

std::vector<std::size_t> MetaLabelSpec::classes() const {
  const std::vector<std::size_t> all{factor_a_classes, factor_b_classes, factor_a_classes};
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(labels, 3))};
}

void SynthSpec::validate() const {
  if (height < 2 || width < 2) throw ConfigError("synth: grid must be at least 2x2");
  if (feature_dim < 1) throw ConfigError("synth: feature_dim must be >= 1");
  if (meta.labels < 1 || meta.labels > 3) throw ConfigError("synth: meta labels must be 1..3");
  if (meta.factor_a_classes < 1 || meta.factor_b_classes < 1) {
    throw ConfigError("synth: factor class counts must be >= 1");
  }
  if (!(meta.contradiction_target >= 0.0 && meta.contradiction_target <= 1.0)) {
    throw ConfigError("synth: contradiction target must lie in [0, 1]");
  }
  if (pixel_noise < 0.0 || nuisance_scale < 0.0 || mean_range <= 0.0) {
    throw ConfigError("synth: noise scales must be non-negative and mean_range positive");
  }
}

Dataset generate(const SynthSpec& spec, std::size_t count, std::uint64_t seed) {
  spec.validate();
  if (count < 2) throw ConfigError("generate: need at least 2 images");

  Dataset data;
  data.spec = spec;
  data.seed = seed;
  data.class_means = draw_class_means(spec, seed);

  const std::size_t combos = spec.image_classes();
  std::vector<std::size_t> combo(count);
  for (std::size_t k = 0; k < count; ++k) combo[k] = k % combos;
  auto label_rng = seed::rng(seed, {seed::kDataLabels, 0});
  std::shuffle(combo.begin(), combo.end(), label_rng);

  const std::size_t left = spec.width / 2;
  const std::size_t right = spec.width - left;
  data.images.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    auto rng = seed::rng(seed, {seed::kDataImages, k});
    SyntheticImage img;
    img.id = k;
    img.factor_a = static_cast<int>(combo[k] / spec.meta.factor_b_classes);
    img.factor_b = static_cast<int>(combo[k] % spec.meta.factor_b_classes);
    img.image_class = static_cast<int>(combo[k]);
    img.latent.assign(spec.pixels(), 0);
    paint_object(img.latent, spec, 0, left, 1 + img.factor_a, rng);
    paint_object(img.latent, spec, left, right,
                 static_cast<int>(1 + spec.meta.factor_a_classes) + img.factor_b, rng);

    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec nuisance(spec.feature_dim);
    for (double& v : nuisance) v = spec.nuisance_scale * gauss(rng);
    img.pixels = Mat(spec.pixels(), spec.feature_dim);
    for (std::size_t p = 0; p < spec.pixels(); ++p) {
      ConstSpan mean = data.class_means.row(static_cast<std::size_t>(img.latent[p]));
      for (std::size_t d = 0; d < spec.feature_dim; ++d) {
        img.pixels(p, d) = mean[d] + nuisance[d] + spec.pixel_noise * gauss(rng);
      }
    }
    data.images.push_back(std::move(img));
  }

  std::vector<int> label_a(count);
  std::vector<int> label_b(count);
  for (std::size_t k = 0; k < count; ++k) {
    label_a[k] = data.images[k].factor_a;
    label_b[k] = data.images[k].factor_b;
  }
  std::vector<int> label_c;
  if (spec.meta.labels >= 3) {
    label_c = corrupt_labels(label_a, static_cast<int>(spec.meta.factor_a_classes),
                             spec.meta.contradiction_target, seed);
    const double achieved = contradiction_rate(label_a, label_c);
    if (std::abs(achieved - spec.meta.contradiction_target) > kContradictionTolerance) {
      throw ConfigError("generate: contradiction target " +
                        std::to_string(spec.meta.contradiction_target) +
                        " unreachable (best " + std::to_string(achieved) + ")");
    }
  }
  for (std::size_t k = 0; k < count; ++k) {
    auto& meta = data.images[k].meta;
    meta.push_back(label_a[k]);
    if (spec.meta.labels >= 2) meta.push_back(label_b[k]);
    if (spec.meta.labels >= 3) meta.push_back(label_c[k]);
  }
  return data;
}

ViewPair augment(const SyntheticImage& image, const SynthSpec& spec, const AugmentConfig& config,
                 std::uint64_t seed) {
  auto make_view = [&](std::uint64_t which) {
    auto rng = seed::rng(seed, {seed::kAugment, which});
    SyntheticImage view = image;
    if (config.mask) {
      const std::size_t max_h = std::max<std::size_t>(1, spec.height / 2);
      const std::size_t max_w = std::max<std::size_t>(1, spec.width / 2);
      const std::size_t h = std::uniform_int_distribution<std::size_t>(1, max_h)(rng);
      const std::size_t w = std::uniform_int_distribution<std::size_t>(1, max_w)(rng);
      const std::size_t r0 = std::uniform_int_distribution<std::size_t>(0, spec.height - h)(rng);
      const std::size_t c0 = std::uniform_int_distribution<std::size_t>(0, spec.width - w)(rng);
      for (std::size_t r = r0; r < r0 + h; ++r) {
        for (std::size_t c = c0; c < c0 + w; ++c) {
          for (double& v : view.pixels.row(r * spec.width + c)) v = 0.0;
        }
      }
    }
    if (config.noise_sigma > 0.0) {
      std::normal_distribution<double> gauss(0.0, config.noise_sigma);
      for (double& v : view.pixels.data()) v += gauss(rng);
    }
    return view;
  };
  return ViewPair{make_view(0), make_view(1)};
}

double contradiction_rate(const std::vector<int>& first, const std::vector<int>& second) {
  if (first.size() != second.size()) throw DimensionError("contradiction_rate: length mismatch");
  const std::size_t n = first.size();
  if (n < 2) return 0.0;
  std::size_t disagree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      disagree += (first[i] == first[j]) != (second[i] == second[j]) ? 1 : 0;
    }
  }
  return static_cast<double>(disagree) / static_cast<double>(n * (n - 1) / 2);
}

double contradiction_rate(const Dataset& data, std::size_t m1, std::size_t m2) {
  std::vector<int> a;
  std::vector<int> b;
  a.reserve(data.size());
  b.reserve(data.size());
  for (const SyntheticImage& img : data.images) {
    a.push_back(img.meta.at(m1));
    b.push_back(img.meta.at(m2));
  }
  return contradiction_rate(a, b);
}

}  // namespace gcl
