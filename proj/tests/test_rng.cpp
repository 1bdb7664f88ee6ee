#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gbm/rng.hpp"

using namespace gbm;

TEST_CASE("splitmix streams are deterministic and distinct") {
  const auto key = StreamKey::derive(42, 3, 7);
  auto a = key.path_engine(11);
  auto b = key.path_engine(11);
  for (int i = 0; i < 64; ++i) CHECK(a.next() == b.next());

  auto c = key.path_engine(12);
  auto d = StreamKey::derive(42, 3, 8).path_engine(11);
  auto e = StreamKey::derive(43, 3, 7).path_engine(11);
  bool all_equal_c = true, all_equal_d = true, all_equal_e = true;
  auto f = key.path_engine(11);
  for (int i = 0; i < 64; ++i) {
    const auto r = f.next();
    all_equal_c &= r == c.next();
    all_equal_d &= r == d.next();
    all_equal_e &= r == e.next();
  }
  CHECK_FALSE(all_equal_c);
  CHECK_FALSE(all_equal_d);
  CHECK_FALSE(all_equal_e);
}

TEST_CASE("uniform01 stays inside the open interval") {
  SplitMix64 g(991);
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(g);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal stream matches gaussian moments") {
  NormalStream normals(StreamKey::derive(7, 0, 0).path_engine(0));
  const int n = 2'000'000;
  double sum = 0, sum2 = 0, sum3 = 0, sum4 = 0;
  int beyond2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = normals.next();
    sum += z;
    sum2 += z * z;
    sum3 += z * z * z;
    sum4 += z * z * z * z;
    if (std::abs(z) > 2.0) ++beyond2;
  }
  const double inv = 1.0 / n;
  const double root_n = std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum * inv) < 4.0 / root_n);
  CHECK(std::abs(sum2 * inv - 1.0) < 4.0 * std::sqrt(2.0) / root_n);
  CHECK(std::abs(sum3 * inv) < 4.0 * std::sqrt(15.0) / root_n);
  CHECK(std::abs(sum4 * inv - 3.0) < 4.0 * std::sqrt(96.0) / root_n);
  // Pr{|Z| > 2} = 0.04550026
  CHECK(std::abs(beyond2 * inv - 0.04550026) < 4.0 * 0.2086 / root_n);
}

TEST_CASE("normal stream passes a KS test against the normal law") {
  NormalStream normals(StreamKey::derive(123, 1, 2).path_engine(5));
  const int n = 100000;
  std::vector<double> sample(n);
  for (auto& z : sample) z = normals.next();
  std::sort(sample.begin(), sample.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double phi = 0.5 * std::erfc(-sample[i] / std::sqrt(2.0));
    d = std::max(d, std::abs(phi - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - phi));
  }
  CHECK(d <= 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("zeroed stream is the deterministic hook") {
  NormalStream normals(StreamKey::derive(1, 0, 0).path_engine(0), true);
  CHECK(normals.zeroed());
  for (int i = 0; i < 16; ++i) CHECK(normals.next() == 0.0);
}
