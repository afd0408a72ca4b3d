#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "gcl/errors.hpp"
#include "gcl/filter.hpp"
#include "oracles.hpp"

using gcl::Mat;
using gcl::ScoredCandidate;
using gcl::Vec;

namespace {

// Single-positive term, written directly: -log softmax of the positive logit.
double single_positive_term(gcl::ConstSpan u, const Mat& partner, std::size_t pos,
                            const std::vector<std::size_t>& negs, double tau) {
  const double lp = oracle::naive_dot(u.data(), partner.row(pos).data(), u.size()) / tau;
  double denom = std::exp(lp);
  for (std::size_t n : negs) denom += std::exp(oracle::naive_dot(u.data(), partner.row(n).data(), u.size()) / tau);
  return -(lp - std::log(denom));
}

double block_norm(const Vec& flat, const gcl::EncoderParams& p, gcl::Block b) {
  const auto& info = p.layout()[static_cast<std::size_t>(b)];
  double s = 0.0;
  for (std::size_t k = 0; k < info.size(); ++k) s += flat[info.offset + k] * flat[info.offset + k];
  return s;
}

std::vector<ScoredCandidate> random_pool(std::mt19937_64& rng, std::size_t n, bool ties) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredCandidate> pool(n);
  for (std::size_t k = 0; k < n; ++k) {
    pool[k].index = 3 * k + 1;
    pool[k].affinity = ties ? std::round(u(rng) * 3) / 3 : u(rng);
    pool[k].score = ties ? std::round(u(rng) * 4) / 4 : u(rng);
  }
  return pool;
}

}  // namespace

TEST_CASE("pool size") {
  CHECK(gcl::pool_size_for(64, 0.3) == 20);
  CHECK(gcl::pool_size_for(10, 0.3) == 3);
  CHECK(gcl::pool_size_for(64, 1.0) == 64);
  CHECK(gcl::pool_size_for(4, 0.01) == 1);
  CHECK_THROWS_AS(gcl::pool_size_for(4, 0.0), gcl::ConfigError);
  CHECK_THROWS_AS(gcl::pool_size_for(4, 1.5), gcl::ConfigError);
  CHECK_THROWS_AS((gcl::PaceConfig{0, 0.3}.validate()), gcl::ConfigError);
}

TEST_CASE("build_pool") {
  const Vec row{0.9, 0.1, 0.5, 0.3};
  CHECK(gcl::build_pool(row, 0.5) == std::vector<std::size_t>{0, 2});
  CHECK(gcl::build_pool(row, 1.0) == std::vector<std::size_t>{0, 2, 3, 1});
  CHECK(gcl::pool_complement(4, gcl::build_pool(row, 0.5)) == std::vector<std::size_t>{1, 3});
  CHECK(gcl::build_pool(Vec{0.2, 0.7, 0.7, 0.7}, 0.5) == std::vector<std::size_t>{1, 2});

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 70;
    Vec r(n);
    for (double& v : r) v = static_cast<double>(rng() % 9) / 8.0 - 0.5;  // many ties
    const double k = 0.05 + 0.95 * static_cast<double>(rng() % 100) / 99.0;
    const auto pool = gcl::build_pool(r, k);
    CHECK(pool == oracle::top_k(r, gcl::pool_size_for(n, k)));
    const auto rest = gcl::pool_complement(n, pool);
    CHECK(pool.size() + rest.size() == n);
  }
}

TEST_CASE("pace schedule") {
  CHECK(gcl::pace_raw(0, 500, 20) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(gcl::pace_size(0, 500, 20) == 1);
  CHECK(gcl::pace_raw(500, 500, 20) == doctest::Approx(20.0 * (1 + 0.25 * std::log1p(std::exp(-4.0)))));
  CHECK(gcl::pace_raw(500, 500, 20) == doctest::Approx(20.0907).epsilon(1e-5));
  CHECK(gcl::pace_size(500, 500, 20) == 20);
  CHECK(gcl::pace_raw(250, 500, 20) / 20 == doctest::Approx(0.8357072798).epsilon(1e-9));
  CHECK(gcl::pace_size(250, 500, 20) == 17);

  for (std::size_t pool : {1u, 2u, 7u, 20u, 64u}) {
    std::size_t prev = 0;
    for (std::uint64_t t = 0; t <= 300; ++t) {
      const std::size_t s = gcl::pace_size(t, 300, pool);
      CHECK(s >= 1);
      CHECK(s <= pool);
      CHECK(s >= prev);
      prev = s;
    }
    CHECK(prev == pool);
  }
}

TEST_CASE("score_positive matches the finite-difference gradient norm") {
  std::mt19937_64 rng(2);
  const gcl::EncoderDims d{3, 4, 3, 3};
  const std::size_t n_params = gcl::init_params(0, d).size();
  int checked = 0;
  while (checked < 6) {
    const gcl::EncoderParams p(d, oracle::random_vec(rng, n_params, 0.7));
    const Mat img(4, 3, oracle::random_vec(rng, 12));
    const Mat partner = oracle::random_unit_rows(rng, 4, 3);
    const std::size_t anchor = rng() % 4;
    const std::vector<std::size_t> negs{1, 3};
    const double tau = 0.5;
    gcl::ForwardResult fwd;
    try {
      fwd = gcl::forward(p, img);
    } catch (const gcl::DegenerateVectorError&) {
      continue;
    }
    auto f = [&](gcl::ConstSpan flat) {
      const auto reps = gcl::forward(gcl::unflatten(d, flat), img, false).reps;
      return single_positive_term(reps.pix.row(anchor), partner, 0, negs, tau);
    };
    const Vec fd = gcl::finite_diff_grad(f, p.flat());
    const double expect_last = std::sqrt(block_norm(fd, p, gcl::Block::kFW2));
    const double expect_head = std::sqrt(block_norm(fd, p, gcl::Block::kFW2) +
                                         block_norm(fd, p, gcl::Block::kPixW1) +
                                         block_norm(fd, p, gcl::Block::kPixW2));
    const double got = gcl::score_positive(p, fwd.reps, *fwd.trace, anchor, partner, 0, negs, tau);
    const double got_head = gcl::score_positive(p, fwd.reps, *fwd.trace, anchor, partner, 0, negs, tau,
                                                gcl::ScoreLayers::kEncoderLastAndPixelHead);
    CHECK(std::abs(got - expect_last) <= 1e-4 * std::max(expect_last, 1e-8));
    CHECK(std::abs(got_head - expect_head) <= 1e-4 * std::max(expect_head, 1e-8));
    ++checked;
  }
}

TEST_CASE("score_positive edge cases") {
  std::mt19937_64 rng(3);
  const gcl::EncoderDims d{3, 6, 4, 4};
  const gcl::EncoderParams p(d, oracle::random_vec(rng, gcl::init_params(0, d).size(), 0.7));
  const Mat img(4, 3, oracle::random_vec(rng, 12));
  const auto fwd = gcl::forward(p, img);
  Mat partner = oracle::random_unit_rows(rng, 4, 4);

  CHECK(gcl::score_positive(p, fwd.reps, *fwd.trace, 0, partner, 2, {}, 0.5) == 0.0);

  const std::vector<std::size_t> negs{0, 1};
  const double s = gcl::score_positive(p, fwd.reps, *fwd.trace, 1, partner, 2, negs, 0.5);
  // Another pool member changing does not affect this positive's score.
  std::copy(partner.row(2).begin(), partner.row(2).end(), partner.row(3).begin());
  CHECK(gcl::score_positive(p, fwd.reps, *fwd.trace, 1, partner, 2, negs, 0.5) == s);
  CHECK_THROWS_AS(gcl::score_positive(p, fwd.reps, *fwd.trace, 9, partner, 2, negs, 0.5), gcl::ContractError);
}

TEST_CASE("screen endpoints") {
  std::mt19937_64 rng(4);
  auto pool = random_pool(rng, 20, false);
  const auto first = gcl::screen(pool, 0, 100);
  REQUIRE(first.size() == 1);
  const auto best = std::min_element(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    return a.score < b.score;
  });
  CHECK(first[0] == best->index);
  CHECK(best->admitted);
  CHECK(gcl::screen(pool, 100, 100).size() == 20);
  for (const auto& c : pool) CHECK(c.admitted);
}

TEST_CASE("screen equals the full-sort reference and is nested over time") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const bool ties = trial % 2 == 0;
    auto pool = random_pool(rng, 1 + rng() % 30, ties);
    std::vector<double> scores, aff;
    std::vector<std::size_t> idx;
    for (const auto& c : pool) {
      scores.push_back(c.score);
      aff.push_back(c.affinity);
      idx.push_back(c.index);
    }
    std::vector<std::size_t> prev;
    for (std::uint64_t t = 0; t <= 50; t += 5) {
      const auto got = gcl::screen(pool, t, 50);
      const auto want = oracle::lowest_k(scores, aff, idx, gcl::pace_size(t, 50, pool.size()));
      CHECK(got == want);
      CHECK_FALSE(got.empty());
      CHECK(std::equal(prev.begin(), prev.end(), got.begin()));

      double max_in = -1e300, min_out = 1e300;
      for (const auto& c : pool) {
        if (c.admitted) max_in = std::max(max_in, c.score);
        else min_out = std::min(min_out, c.score);
      }
      CHECK(max_in <= min_out);
      prev = got;
    }
  }
}
