#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "gcl/errors.hpp"
#include "gcl/probe.hpp"
#include "oracles.hpp"

using gcl::Mat;
using gcl::Vec;

namespace {

// NMI from the joint count table, written out directly.
double nmi_reference(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::map<int, double> pa, pb;
  std::map<std::pair<int, int>, double> pab;
  for (std::size_t k = 0; k < a.size(); ++k) {
    pa[a[k]] += 1 / n;
    pb[b[k]] += 1 / n;
    pab[{a[k], b[k]}] += 1 / n;
  }
  double ha = 0, hb = 0, mi = 0;
  for (auto [_, p] : pa) ha -= p * std::log(p);
  for (auto [_, p] : pb) hb -= p * std::log(p);
  for (auto [key, p] : pab) mi += p * std::log(p / (pa[key.first] * pb[key.second]));
  if (ha + hb == 0) return 1.0;
  return 2 * mi / (ha + hb);
}

}  // namespace

TEST_CASE("linear probe on one-hot separable features is perfect") {
  std::vector<Vec> x;
  std::vector<int> y;
  for (int k = 0; k < 60; ++k) {
    Vec v(4, 0.0);
    v[static_cast<std::size_t>(k % 4)] = 1.0;
    x.push_back(v);
    y.push_back(k % 4);
  }
  std::vector<double> folds;
  std::size_t failed = 9;
  CHECK(gcl::linear_probe_accuracy(x, y, 4, gcl::ProbeConfig{}, &folds, &failed) == 1.0);
  CHECK(folds.size() == 5);
  CHECK(failed == 0);
}

TEST_CASE("linear probe reports degenerate folds") {
  std::vector<Vec> x(20, Vec{1.0, 2.0});
  std::vector<int> y(20, 0);
  std::size_t failed = 0;
  gcl::linear_probe_accuracy(x, y, 3, gcl::ProbeConfig{}, nullptr, &failed);
  CHECK(failed == 5);
  CHECK_THROWS(gcl::linear_probe_accuracy(x, std::vector<int>(19, 0), 3, gcl::ProbeConfig{}));
}

TEST_CASE("linear probe is deterministic and near chance on noise") {
  std::mt19937_64 rng(1);
  std::vector<Vec> x;
  std::vector<int> y;
  for (int k = 0; k < 200; ++k) {
    x.push_back(oracle::random_vec(rng, 6));
    y.push_back(static_cast<int>(rng() % 4));
  }
  const gcl::ProbeConfig cfg;
  const double a = gcl::linear_probe_accuracy(x, y, 4, cfg);
  CHECK(a == gcl::linear_probe_accuracy(x, y, 4, cfg));
  CHECK(std::abs(a - 0.25) < 0.15);
}

TEST_CASE("nearest centroid") {
  std::mt19937_64 rng(2);
  std::vector<Mat> rows;
  std::vector<std::vector<int>> labels;
  for (int img = 0; img < 10; ++img) {
    Mat m(6, 3);
    std::vector<int> l;
    for (std::size_t r = 0; r < 6; ++r) {
      const int c = static_cast<int>(r % 3);
      m(r, static_cast<std::size_t>(c)) = 5.0;
      m(r, (static_cast<std::size_t>(c) + 1) % 3) = 0.1 * oracle::random_vec(rng, 1)[0];
      l.push_back(c);
    }
    rows.push_back(m);
    labels.push_back(l);
  }
  CHECK(gcl::nearest_centroid_accuracy(rows, labels, 3, gcl::ProbeConfig{}) == 1.0);
}

TEST_CASE("normalized mutual information") {
  CHECK(gcl::normalized_mutual_information({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(0.0));
  CHECK(gcl::normalized_mutual_information({0, 0, 1, 2}, {7, 7, 3, 4}) == doctest::Approx(1.0));
  CHECK(gcl::normalized_mutual_information({1, 1, 1}, {2, 2, 2}) == 1.0);
  CHECK(gcl::normalized_mutual_information({0, 0, 1, 1}, {0, 0, 0, 1}) ==
        doctest::Approx(0.3437110184854508).epsilon(1e-12));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a, b;
    for (int k = 0; k < 40; ++k) {
      a.push_back(static_cast<int>(rng() % 4));
      b.push_back(static_cast<int>(rng() % 5));
    }
    const double v = gcl::normalized_mutual_information(a, b);
    CHECK(v == doctest::Approx(nmi_reference(a, b)).epsilon(1e-12));
    CHECK(v == doctest::Approx(gcl::normalized_mutual_information(b, a)).epsilon(1e-14));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("k-means recovers well separated clusters") {
  std::mt19937_64 rng(4);
  std::vector<Vec> pts;
  std::vector<int> truth;
  const std::vector<Vec> centres{{0, 0}, {10, 0}, {0, 10}};
  for (int k = 0; k < 45; ++k) {
    Vec p = centres[static_cast<std::size_t>(k % 3)];
    const Vec noise = oracle::random_vec(rng, 2, 0.3);
    p[0] += noise[0];
    p[1] += noise[1];
    pts.push_back(p);
    truth.push_back(k % 3);
  }
  const auto a = gcl::kmeans(pts, 3, 5, 3, 50);
  CHECK(gcl::normalized_mutual_information(a, truth) == doctest::Approx(1.0));
  CHECK(a == gcl::kmeans(pts, 3, 5, 3, 50));
}

TEST_CASE("random-init encoder: label-shuffled probe sits at chance") {
  // Unshuffled, random-init features are already informative on this data.
  gcl::SynthSpec spec;
  double shuffled_total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = gcl::generate(spec, 240, seed);
    const auto params = gcl::init_params(seed + 100, gcl::EncoderDims{});
    const auto scores = gcl::probe(params, data, gcl::ProbeConfig{5, seed});
    CHECK(scores.failed_folds == 0);
    CHECK(scores.fold_accuracy.size() == 5);
    CHECK(scores.linear_accuracy > 1.0 / 12.0);

    const auto emb = gcl::embed(params, data);
    std::vector<int> labels;
    for (const auto& img : data.images) labels.push_back(img.image_class);
    std::mt19937_64 rng(seed);
    std::shuffle(labels.begin(), labels.end(), rng);
    shuffled_total += gcl::linear_probe_accuracy(emb.image, labels, 12, gcl::ProbeConfig{5, seed});
  }
  CHECK(std::abs(shuffled_total / 5.0 - 1.0 / 12.0) <= 0.15);
}

TEST_CASE("probe is deterministic") {
  gcl::SynthSpec spec;
  const auto data = gcl::generate(spec, 60, 1);
  const auto params = gcl::init_params(7, gcl::EncoderDims{});
  const auto a = gcl::probe(params, data, gcl::ProbeConfig{});
  const auto b = gcl::probe(params, data, gcl::ProbeConfig{});
  CHECK(a.linear_accuracy == b.linear_accuracy);
  CHECK(a.pixel_accuracy == b.pixel_accuracy);
  CHECK(a.nmi == b.nmi);
}
