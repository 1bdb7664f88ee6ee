#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "gbm/rng.hpp"
#include "gbm/stats.hpp"

using namespace gbm;

TEST_CASE("accumulator matches direct formulas") {
  const std::vector<double> xs = {1.0, 2.0, 4.0, 8.0, 16.0};
  Accumulator acc;
  for (double x : xs) acc.add(x);
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  CHECK(acc.n == xs.size());
  CHECK(acc.mean == doctest::Approx(mean).epsilon(1e-15));
  CHECK(acc.variance() == doctest::Approx(ss / (xs.size() - 1)).epsilon(1e-14));
  CHECK(acc.max_sample == 16.0);
}

TEST_CASE("merging partial accumulators is order-independent to 1e-12") {
  std::mt19937_64 gen(2024);
  std::lognormal_distribution<double> heavy(0.0, 2.0);
  std::vector<double> xs(20000);
  for (auto& x : xs) x = heavy(gen);

  Accumulator direct;
  for (double x : xs) direct.add(x);

  for (int trial = 0; trial < 20; ++trial) {
    // random partition into pieces
    std::vector<Accumulator> parts;
    std::size_t i = 0;
    std::uniform_int_distribution<std::size_t> width(1, 997);
    while (i < xs.size()) {
      const std::size_t hi = std::min(xs.size(), i + width(gen));
      Accumulator part;
      for (; i < hi; ++i) part.add(xs[i]);
      parts.push_back(part);
    }
    std::shuffle(parts.begin(), parts.end(), gen);
    Accumulator merged;
    for (const auto& p : parts) merged.merge(p);
    CHECK(merged.n == direct.n);
    CHECK(merged.mean == doctest::Approx(direct.mean).epsilon(1e-12));
    CHECK(merged.stderr_of_mean() ==
          doctest::Approx(direct.stderr_of_mean()).epsilon(1e-12));
    CHECK(merged.max_sample == direct.max_sample);
  }
}

TEST_CASE("stderr is zero exactly when all samples are equal") {
  Accumulator constant;
  for (int i = 0; i < 1000; ++i) constant.add(3.5);
  CHECK(constant.stderr_of_mean() == 0.0);

  Accumulator varied;
  varied.add(1.0);
  varied.add(1.0 + 1e-12);
  CHECK(varied.stderr_of_mean() > 0.0);

  Accumulator single;
  single.add(7.0);
  CHECK(single.stderr_of_mean() == 0.0);
}

TEST_CASE("run_batch is bit-identical across thread counts") {
  auto eval = [](std::uint64_t i, double* out) {
    out[0] = std::sin(static_cast<double>(i) * 0.37) * 10.0;
    out[1] = static_cast<double>(i % 97);
  };
  const auto one = run_batch(123457, 1, 2, eval, true);
  const auto four = run_batch(123457, 4, 2, eval, true);
  const auto eight = run_batch(123457, 8, 2, eval, true);
  for (std::size_t col = 0; col < 2; ++col) {
    CHECK(one.columns[col].total.mean == four.columns[col].total.mean);
    CHECK(one.columns[col].total.m2 == four.columns[col].total.m2);
    CHECK(one.columns[col].total.max_sample == four.columns[col].total.max_sample);
    CHECK(one.columns[col].block_means == four.columns[col].block_means);
    CHECK(one.columns[col].total.mean == eight.columns[col].total.mean);
    CHECK(one.columns[col].total.m2 == eight.columns[col].total.m2);
  }
  CHECK(one.checkpoint_ns == four.checkpoint_ns);
  CHECK(one.checkpoint_means == four.checkpoint_means);
}

TEST_CASE("run_batch checkpoints are exact prefix means") {
  auto eval = [](std::uint64_t i, double* out) {
    out[0] = static_cast<double>(i % 7);
  };
  const std::uint64_t n = 1ull << 20;
  const auto stats = run_batch(n, 3, 1, eval, true);
  REQUIRE(stats.checkpoint_ns.size() == 5);
  for (std::size_t k = 0; k < stats.checkpoint_ns.size(); ++k) {
    const std::uint64_t m = stats.checkpoint_ns[k];
    CHECK(m == (1ull << (16 + k)));
    double sum = 0;
    for (std::uint64_t i = 0; i < m; ++i) sum += static_cast<double>(i % 7);
    CHECK(stats.checkpoint_means[k] ==
          doctest::Approx(sum / static_cast<double>(m)).epsilon(1e-13));
  }
}

TEST_CASE("trimmed mean sits inside the block-mean range") {
  // rare spikes at hashed positions; fewer spikes than blocks, so the
  // median block is spike-free and the trimmed mean ignores them
  auto eval = [](std::uint64_t i, double* out) {
    out[0] = (gbm::mix64(i) % 5000 == 0) ? 1e6 : 1.0;
  };
  const auto stats = run_batch(50000, 2, 1, eval);
  const auto est = stats.columns[0].estimate();
  const auto& blocks = stats.columns[0].block_means;
  const double lo = *std::min_element(blocks.begin(), blocks.end());
  const double hi = *std::max_element(blocks.begin(), blocks.end());
  CHECK(est.trimmed_mean >= lo);
  CHECK(est.trimmed_mean <= hi);
  CHECK(est.trimmed_mean < est.mean);  // spikes pull the raw mean up
  CHECK(est.max_sample == 1e6);
}

TEST_CASE("identity report z-score and degenerate cases") {
  EstimateWithCI a{1.0, 0.01, 100, 2.0, 1.0};
  EstimateWithCI b{1.05, 0.02, 100, 2.0, 1.05};
  const auto r = make_report(IdentityId::CdfNoDrift, a, b);
  CHECK(r.z_score == doctest::Approx(-0.05 / std::hypot(0.01, 0.02)));
  CHECK(r.pass);

  EstimateWithCI c{1.0, 0.0, 10, 1.0, 1.0};
  const auto same = make_report(IdentityId::Yor, c, c);
  CHECK(same.z_score == 0.0);
  CHECK(same.pass);

  EstimateWithCI d{2.0, 0.0, 10, 2.0, 2.0};
  const auto apart = make_report(IdentityId::Yor, c, d);
  CHECK(std::isinf(apart.z_score));
  CHECK_FALSE(apart.pass);

  const auto far = make_report(IdentityId::AsianPrice, a,
                               EstimateWithCI{2.0, 0.01, 100, 2.0, 2.0});
  CHECK_FALSE(far.pass);
}

TEST_CASE("affine transform rescales estimate fields") {
  EstimateWithCI e{2.0, 0.5, 10, 6.0, 1.8};
  const auto out = e.affine(3.0, 1.0);
  CHECK(out.mean == doctest::Approx(7.0));
  CHECK(out.stderr_ == doctest::Approx(1.5));
  CHECK(out.max_sample == doctest::Approx(19.0));
  CHECK(out.trimmed_mean == doctest::Approx(6.4));
  CHECK(out.n_samples == 10);
}
