#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "gcl/errors.hpp"
#include "gcl/synthdata.hpp"

using gcl::SynthSpec;

namespace {

// Disagreement counted pair by pair.
double enumerate_disagreement(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t pairs = 0, bad = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      ++pairs;
      if ((a[i] == a[j]) != (b[i] == b[j])) ++bad;
    }
  }
  return static_cast<double>(bad) / static_cast<double>(pairs);
}

std::vector<int> column(const gcl::Dataset& d, std::size_t m) {
  std::vector<int> out;
  for (const auto& img : d.images) out.push_back(img.meta[m]);
  return out;
}

std::size_t zero_rows(const gcl::Mat& m) {
  std::size_t n = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("contradiction_rate worked cases") {
  CHECK(gcl::contradiction_rate({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  CHECK(gcl::contradiction_rate({0, 1, 2, 0}, {0, 1, 2, 0}) == 0.0);
  CHECK(gcl::contradiction_rate({0, 1, 2, 0}, {5, 3, 9, 5}) == 0.0);
  CHECK_THROWS(gcl::contradiction_rate({0, 1}, {0}));
}

TEST_CASE("contradiction_rate is symmetric and matches pair enumeration") {
  const auto d = gcl::generate(SynthSpec{}, 60, 3);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      CHECK(gcl::contradiction_rate(d, a, b) == gcl::contradiction_rate(d, b, a));
      CHECK(gcl::contradiction_rate(d, a, b) ==
            doctest::Approx(enumerate_disagreement(column(d, a), column(d, b))).epsilon(1e-14));
    }
  }
}

TEST_CASE("generated label 2 hits the contradiction target") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = gcl::generate(SynthSpec{}, 96, seed);
    CAPTURE(seed);
    CHECK(std::abs(enumerate_disagreement(column(d, 0), column(d, 2)) - 0.4) <= 0.05);
  }
  SynthSpec zero;
  zero.meta.contradiction_target = 0.0;
  const auto d = gcl::generate(zero, 50, 1);
  CHECK(column(d, 2) == column(d, 0));
}

TEST_CASE("generate is deterministic and consistent") {
  const SynthSpec spec;
  const auto a = gcl::generate(spec, 40, 11);
  const auto b = gcl::generate(spec, 40, 11);
  CHECK(a.images == b.images);
  CHECK(a.class_means == b.class_means);
  CHECK_FALSE(gcl::generate(spec, 40, 12).images == a.images);

  std::set<int> image_classes;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto& img = a.images[k];
    CHECK(img.id == k);
    CHECK(img.pixels.rows() == spec.pixels());
    CHECK(img.pixels.cols() == spec.feature_dim);
    CHECK(img.latent.size() == spec.pixels());
    CHECK(img.meta.size() == 3);
    CHECK(img.meta[0] == img.factor_a);
    CHECK(img.meta[1] == img.factor_b);
    CHECK(img.image_class == img.factor_a * 3 + img.factor_b);
    for (int c : img.latent) {
      CHECK(c >= 0);
      CHECK(c < static_cast<int>(spec.pixel_classes()));
    }
    // Object A lives in the left half, object B in the right half.
    for (std::size_t p = 0; p < spec.pixels(); ++p) {
      const int c = img.latent[p];
      const bool left = p % spec.width < spec.width / 2;
      if (c == 1 + img.factor_a) CHECK(left);
      if (c == 5 + img.factor_b) CHECK_FALSE(left);
    }
    image_classes.insert(img.image_class);
  }
  CHECK(image_classes.size() > 6);
}

TEST_CASE("class means respect the minimum distance") {
  const auto d = gcl::generate(SynthSpec{}, 10, 5);
  for (std::size_t i = 0; i < d.class_means.rows(); ++i) {
    for (std::size_t j = i + 1; j < d.class_means.rows(); ++j) {
      gcl::Vec diff(d.class_means.cols());
      for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = d.class_means(i, k) - d.class_means(j, k);
      CHECK(gcl::norm(diff) >= 1.0);
    }
  }
}

TEST_CASE("generate rejects bad specs") {
  CHECK_THROWS_AS(gcl::generate(SynthSpec{}, 1, 0), gcl::ConfigError);
  SynthSpec s;
  s.meta.contradiction_target = 1.5;
  CHECK_THROWS_AS(gcl::generate(s, 40, 0), gcl::ConfigError);
  SynthSpec t;
  t.meta.labels = 4;
  CHECK_THROWS_AS(gcl::generate(t, 40, 0), gcl::ConfigError);
  SynthSpec u;
  u.feature_dim = 0;
  CHECK_THROWS_AS(gcl::generate(u, 40, 0), gcl::ConfigError);
}

TEST_CASE("augment identity and label preservation") {
  SynthSpec spec;
  spec.meta.contradiction_target = 0.0;
  const auto d = gcl::generate(spec, 4, 2);
  const auto& img = d.images[1];
  const auto same = gcl::augment(img, spec, gcl::AugmentConfig{0.0, false}, 9);
  CHECK(same.first == img);
  CHECK(same.second == img);

  const auto v = gcl::augment(img, spec, gcl::AugmentConfig{}, 9);
  CHECK(v.first.meta == img.meta);
  CHECK(v.second.meta == img.meta);
  CHECK(v.first.id == img.id);
  CHECK(v.first.latent == img.latent);
  CHECK_FALSE(v.first.pixels == v.second.pixels);
  CHECK(gcl::augment(img, spec, gcl::AugmentConfig{}, 9).first == v.first);
}

TEST_CASE("masked fraction never exceeds a quarter") {
  SynthSpec spec;
  spec.meta.contradiction_target = 0.0;
  const auto d = gcl::generate(spec, 2, 3);
  const auto& img = d.images[0];
  REQUIRE(zero_rows(img.pixels) == 0);
  std::size_t max_masked = 0, any = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto v = gcl::augment(img, spec, gcl::AugmentConfig{0.0, true}, seed);
    for (const auto* view : {&v.first, &v.second}) {
      const std::size_t z = zero_rows(view->pixels);
      max_masked = std::max(max_masked, z);
      if (z > 0) ++any;
    }
  }
  CHECK(static_cast<double>(max_masked) / static_cast<double>(spec.pixels()) <= 0.25);
  CHECK(any > 0);
}
