#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <cstring>
#include <vector>

#include "gbm/paths.hpp"

using namespace gbm;

namespace {

std::vector<double> path_increments(const PathConfig& config,
                                    std::uint64_t path_index) {
  NormalStream normals(StreamKey::derive(config.seed, 0, 0).path_engine(path_index));
  return draw_increments(config.horizon, config.steps, normals);
}

}  // namespace

TEST_CASE("config validation rejects bad inputs") {
  PathConfig config;
  config.horizon = -1.0;
  CHECK_THROWS_AS(validate(config), std::invalid_argument);
  config.horizon = 1.0;
  config.steps = 0;
  CHECK_THROWS_AS(validate(config), std::invalid_argument);
  config.steps = 8;
  config.drift = std::nan("");
  CHECK_THROWS_AS(validate(config), std::invalid_argument);
  config.drift = 0.0;
  CHECK_NOTHROW(validate(config));
  CHECK_THROWS_AS(simulate_path(config, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(simulate_path(config, 0.0), std::invalid_argument);
}

TEST_CASE("zero horizon is the degenerate empty integral") {
  PathConfig config;
  config.horizon = 0.0;
  config.steps = 16;
  const auto s = simulate_path(config);
  CHECK(s.integral == 0.0);
  CHECK(s.martingale == 1.0);
  CHECK(s.terminal_log == 0.0);
  CHECK_FALSE(s.blown);
  const auto with_y = simulate_path(config, 2.0);
  CHECK(with_y.girsanov_state == -2.0);  // R_0 = -y
}

TEST_CASE("forced zero increments reproduce the deterministic integral") {
  PathConfig config;
  config.horizon = 1.0;
  config.steps = 1024;
  config.drift = 0.0;
  const std::vector<double> zeros(1024, 0.0);

  const double exact = 2.0 * (1.0 - std::exp(-0.5));  // 0.78693868057473315
  const auto trap = simulate_from_increments(config, zeros);
  CHECK(trap.integral == doctest::Approx(exact).epsilon(2e-8));
  CHECK(trap.martingale == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));

  config.scheme = Scheme::LeftRiemann;
  const auto left = simulate_from_increments(config, zeros);
  const double dt = 1.0 / 1024;
  CHECK(std::abs(left.integral - exact) < dt);       // first-order bias
  CHECK(std::abs(left.integral - exact) > dt * 0.1); // genuinely first order
}

TEST_CASE("identical configs give bit-identical samples") {
  PathConfig config;
  config.horizon = 2.0;
  config.steps = 512;
  config.drift = 0.25;
  config.seed = 987;
  const auto a = simulate_path(config, 1.5, 3);
  const auto b = simulate_path(config, 1.5, 3);
  CHECK(a.terminal_log == b.terminal_log);
  CHECK(a.martingale == b.martingale);
  CHECK(a.integral == b.integral);
  CHECK(a.ratio == b.ratio);
  CHECK(a.girsanov_state == b.girsanov_state);
  CHECK(a.blown == b.blown);

  const auto other_path = simulate_path(config, 1.5, 4);
  CHECK(other_path.terminal_log != a.terminal_log);
}

TEST_CASE("simulate_path equals simulate_from_increments on its own draws") {
  PathConfig config;
  config.horizon = 1.5;
  config.steps = 256;
  config.drift = -0.25;
  config.seed = 55;
  const auto direct = simulate_path(config, 0.8, 9);
  const auto increments = path_increments(config, 9);
  const auto replay = simulate_from_increments(config, increments, 0.8);
  CHECK(direct.terminal_log == replay.terminal_log);
  CHECK(direct.integral == replay.integral);
  CHECK(direct.martingale == replay.martingale);
  CHECK(direct.girsanov_state == replay.girsanov_state);
}

TEST_CASE("drifted integral dominates the base integral pathwise") {
  PathConfig config;
  config.horizon = 1.0;
  config.steps = 128;
  config.seed = 31;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto pair = simulate_density_pair(config, i);
    CHECK(pair.lower < pair.upper);
    CHECK(pair.lower > 0.0);
    CHECK(pair.ratio > 0.0);
  }
}

TEST_CASE("trapezoid minus left riemann shrinks linearly in dt") {
  // T - L = (dt/2)(f(t) - f(0)) exactly, so halving dt halves the gap on a
  // refinement sharing the same terminal point.
  PathConfig coarse;
  coarse.horizon = 1.0;
  coarse.steps = 64;
  coarse.seed = 77;
  PathConfig fine = coarse;
  fine.steps = 128;

  NormalStream midpoints(StreamKey::derive(99, 0, 1).path_engine(0));
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto increments = path_increments(coarse, i);
    const auto refined =
        bridge_refine(increments, coarse.horizon / coarse.steps, midpoints);

    auto gap = [](const PathConfig& config, std::span<const double> inc) {
      PathConfig trap = config;
      trap.scheme = Scheme::Trapezoid;
      PathConfig left = config;
      left.scheme = Scheme::LeftRiemann;
      return simulate_from_increments(trap, inc).integral -
             simulate_from_increments(left, inc).integral;
    };
    const double coarse_gap = gap(coarse, increments);
    const double fine_gap = gap(fine, refined);
    CHECK(coarse_gap / fine_gap == doctest::Approx(2.0).epsilon(1e-9));
  }
}

TEST_CASE("bridge refinement preserves the coarse brownian path") {
  PathConfig config;
  config.horizon = 2.0;
  config.steps = 32;
  config.seed = 5;
  const auto increments = path_increments(config, 0);
  NormalStream midpoints(StreamKey::derive(5, 0, 1).path_engine(0));
  const auto refined =
      bridge_refine(increments, config.horizon / config.steps, midpoints);
  REQUIRE(refined.size() == 2 * increments.size());
  for (std::size_t k = 0; k < increments.size(); ++k) {
    CHECK(refined[2 * k] + refined[2 * k + 1] ==
          doctest::Approx(increments[k]).epsilon(1e-14));
  }
}

TEST_CASE("girsanov state is negative until the integral blows") {
  PathConfig config;
  config.horizon = 1.0;
  config.steps = 256;
  config.seed = 13;
  int non_blown = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto s = simulate_path(config, 1.0, i);
    if (!s.blown) {
      ++non_blown;
      CHECK(s.girsanov_state < 0.0);
      CHECK(s.girsanov_state ==
            doctest::Approx(-s.martingale / (1.0 - 0.5 * s.integral))
                .epsilon(1e-12));
      CHECK(s.integral < 2.0);
    } else {
      CHECK(std::isnan(s.girsanov_state));
      CHECK(s.integral >= 2.0);
    }
  }
  CHECK(non_blown > 50);

  // enormous y forces an immediate blow-up
  const auto blown = simulate_path(config, 1e9, 0);
  CHECK(blown.blown);
}

TEST_CASE("sde residual shrinks under bridge refinement") {
  PathConfig coarse;
  coarse.horizon = 1.0;
  coarse.steps = 256;
  coarse.seed = 2027;
  PathConfig fine = coarse;
  fine.steps = 512;
  const double y = 1.0;

  std::vector<double> ratios;
  NormalStream midpoints(StreamKey::derive(2027, 0, 1).path_engine(0));
  for (std::uint64_t i = 0; ratios.size() < 100 && i < 500; ++i) {
    const auto increments = path_increments(coarse, i);
    const double rc = girsanov_residual(coarse, increments, y);
    if (std::isnan(rc)) continue;
    const auto refined =
        bridge_refine(increments, coarse.horizon / coarse.steps, midpoints);
    const double rf = girsanov_residual(fine, refined, y);
    if (std::isnan(rf)) continue;
    ratios.push_back(rc / rf);
  }
  REQUIRE(ratios.size() >= 100);
  std::sort(ratios.begin(), ratios.end());
  const double median = ratios[ratios.size() / 2];
  CHECK(median > 1.1);
  CHECK(median < 3.5);
}
