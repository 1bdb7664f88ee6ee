#include "gbm/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace gbm {

namespace {

// Substream tags; the low byte carries a per-op index where needed.
constexpr std::uint64_t kSubCdfDirect = 1ull << 8;
constexpr std::uint64_t kSubCdfIdentity = 2ull << 8;
constexpr std::uint64_t kSubDensity = 3ull << 8;
constexpr std::uint64_t kSubMoment = 4ull << 8;
constexpr std::uint64_t kSubSuperLhs = 5ull << 8;
constexpr std::uint64_t kSubSuperRhs = 6ull << 8;
constexpr std::uint64_t kSubMeasureLhs = 7ull << 8;
constexpr std::uint64_t kSubMeasureRhs = 8ull << 8;
constexpr std::uint64_t kSubLowerTail = 13ull << 8;

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

void require_time(double t) {
  require(std::isfinite(t) && t > 0.0, "t must be finite and > 0");
}

void require_level(double a) {
  require(std::isfinite(a) && a > 0.0, "a must be finite and > 0");
}

}  // namespace

void validate(const McConfig& config) {
  require(config.n_samples >= 1, "n_samples must be >= 1");
  require(config.steps >= 1, "steps must be >= 1");
}

const char* to_string(MomentVariant v) {
  switch (v) {
    case MomentVariant::NoDrift: return "no_drift";
    case MomentVariant::HalfDrift: return "half_drift";
    case MomentVariant::RatioMoverA: return "ratio_m_over_a";
  }
  return "unknown";
}

const char* to_string(MeasureChangeF f) {
  switch (f) {
    case MeasureChangeF::One: return "one";
    case MeasureChangeF::X: return "x";
    case MeasureChangeF::XOverNegZ: return "x_over_neg_z";
    case MeasureChangeF::XPowNu: return "x_pow_nu";
  }
  return "unknown";
}

namespace detail {

NormalStream normals_for(const McConfig& config, std::uint64_t substream,
                         std::uint64_t path_index) {
  const auto key = StreamKey::derive(config.seed, config.stream, substream);
  return NormalStream(key.path_engine(path_index), config.zero_increments);
}

EstimateWithCI cdf_direct_sub(double t, double a, double nu,
                              const McConfig& config, std::uint64_t substream) {
  const auto key = StreamKey::derive(config.seed, config.stream, substream);
  const double coef_s = nu - 0.5;
  auto eval = [&](std::uint64_t i, double* out) {
    NormalStream normals(key.path_engine(i), config.zero_increments);
    const auto f = integrate_exp(1.0, coef_s, t, config.steps, config.scheme,
                                 normals);
    out[0] = f.integral <= a ? 1.0 : 0.0;
  };
  return run_batch(config.n_samples, config.threads, 1, eval).columns[0].estimate();
}

}  // namespace detail

EstimateWithCI cdf_direct(double t, double a, double nu, const McConfig& config) {
  validate(config);
  require_time(t);
  require_level(a);
  require(std::isfinite(nu), "nu must be finite");
  return detail::cdf_direct_sub(t, a, nu, config, kSubCdfDirect);
}

namespace {

// Shared core of cdf_identity and cdf_identity_drift; at nu = 0 the drift
// factors are exact IEEE identities (pow(x, -0) = 1), so the drifted entry
// point collapses bit-for-bit onto the base one. The optional second column
// accumulates min(sample, cap) on the same paths.
detail::CappedEstimates identity_core(double t, double a, double nu,
                                      const McConfig& config,
                                      const double* cap_scaled) {
  const auto key = StreamKey::derive(config.seed, config.stream, kSubCdfIdentity);
  const double coef_s = nu - 0.5;
  const double scale = std::pow(a, 2.0 * nu) * std::exp(-2.0 / a);
  const double cap_raw = cap_scaled ? *cap_scaled / scale : 0.0;
  const std::size_t cols = cap_scaled ? 2 : 1;
  auto eval = [&](std::uint64_t i, double* out) {
    NormalStream normals(key.path_engine(i), config.zero_increments);
    const auto f = integrate_exp(1.0, coef_s, t, config.steps, config.scheme,
                                 normals);
    const double g = std::exp(f.terminal_log + coef_s * t);
    const double raw = std::pow(a + f.integral, -2.0 * nu) *
                       std::exp(2.0 * g / (a + f.integral));
    out[0] = raw;
    if (cols == 2) out[1] = std::min(raw, cap_raw);
  };
  const auto stats = run_batch(config.n_samples, config.threads, cols, eval);
  detail::CappedEstimates result;
  result.full = stats.columns[0].estimate().affine(scale);
  if (cols == 2) result.capped = stats.columns[1].estimate().affine(scale);
  return result;
}

}  // namespace

EstimateWithCI cdf_identity(double t, double a, const McConfig& config) {
  validate(config);
  require_time(t);
  require_level(a);
  return identity_core(t, a, 0.0, config, nullptr).full;
}

EstimateWithCI cdf_identity_drift(double t, double a, double nu,
                                  const McConfig& config) {
  validate(config);
  require_time(t);
  require_level(a);
  require(std::isfinite(nu), "nu must be finite");
  return identity_core(t, a, nu, config, nullptr).full;
}

namespace detail {

CappedEstimates cdf_identity_capped(double t, double a, double nu,
                                    const McConfig& config, double cap_scaled) {
  validate(config);
  require_time(t);
  require_level(a);
  require(std::isfinite(nu), "nu must be finite");
  require(cap_scaled > 0.0, "cap must be > 0");
  return identity_core(t, a, nu, config, &cap_scaled);
}

}  // namespace detail

IdentityReport cdf_check(double t, double a, double nu, const McConfig& config) {
  const EstimateWithCI direct = cdf_direct(t, a, nu, config);
  const EstimateWithCI identity =
      nu == 0.0 ? cdf_identity(t, a, config)
                : cdf_identity_drift(t, a, nu, config);
  return make_report(nu == 0.0 ? IdentityId::CdfNoDrift : IdentityId::CdfDrift,
                     direct, identity);
}

namespace {

BatchStats density_batch(double t, double a, const McConfig& config) {
  const auto key = StreamKey::derive(config.seed, config.stream, kSubDensity);
  const double scale = 2.0 / (a * a);
  auto eval = [&](std::uint64_t i, double* out) {
    NormalStream normals(key.path_engine(i), config.zero_increments);
    const auto pair =
        simulate_density_pair(t, config.steps, config.scheme, normals);
    out[0] = (pair.lower <= a && a < pair.upper) ? scale : 0.0;
    const double in_a = pair.lower <= a ? 1.0 : 0.0;
    const double in_ratio = pair.ratio <= a ? 1.0 : 0.0;
    out[1] = scale * (in_a - in_ratio);
  };
  return run_batch(config.n_samples, config.threads, 2, eval);
}

}  // namespace

EstimateWithCI density_event(double t, double a, const McConfig& config) {
  validate(config);
  require_time(t);
  require_level(a);
  return density_batch(t, a, config).columns[0].estimate();
}

EstimateWithCI density_difference(double t, double a, const McConfig& config) {
  validate(config);
  require_time(t);
  require_level(a);
  return density_batch(t, a, config).columns[1].estimate();
}

IdentityReport density_check(double t, double a, const McConfig& config) {
  validate(config);
  require_time(t);
  require_level(a);
  const auto stats = density_batch(t, a, config);
  return make_report(IdentityId::Density, stats.columns[0].estimate(),
                     stats.columns[1].estimate());
}

std::vector<EstimateWithCI> cdf_direct_many(double t, std::span<const double> as,
                                            double nu, const McConfig& config) {
  validate(config);
  require_time(t);
  require(!as.empty(), "cdf_direct_many: empty level list");
  for (double a : as) require_level(a);
  require(std::isfinite(nu), "nu must be finite");

  const auto key = StreamKey::derive(config.seed, config.stream, kSubCdfDirect);
  const double coef_s = nu - 0.5;
  auto eval = [&](std::uint64_t i, double* out) {
    NormalStream normals(key.path_engine(i), config.zero_increments);
    const auto f = integrate_exp(1.0, coef_s, t, config.steps, config.scheme,
                                 normals);
    for (std::size_t j = 0; j < as.size(); ++j) {
      out[j] = f.integral <= as[j] ? 1.0 : 0.0;
    }
  };
  const auto stats = run_batch(config.n_samples, config.threads, as.size(), eval);
  std::vector<EstimateWithCI> result;
  result.reserve(as.size());
  for (std::size_t j = 0; j < as.size(); ++j) {
    result.push_back(stats.columns[j].estimate());
  }
  return result;
}

std::vector<IdentityReport> density_check_many(double t,
                                               std::span<const double> as,
                                               const McConfig& config) {
  validate(config);
  require_time(t);
  require(!as.empty(), "density_check_many: empty level list");
  for (double a : as) require_level(a);

  const auto key = StreamKey::derive(config.seed, config.stream, kSubDensity);
  auto eval = [&](std::uint64_t i, double* out) {
    NormalStream normals(key.path_engine(i), config.zero_increments);
    const auto pair =
        simulate_density_pair(t, config.steps, config.scheme, normals);
    for (std::size_t j = 0; j < as.size(); ++j) {
      const double a = as[j];
      const double scale = 2.0 / (a * a);
      out[2 * j] = (pair.lower <= a && a < pair.upper) ? scale : 0.0;
      const double in_a = pair.lower <= a ? 1.0 : 0.0;
      const double in_ratio = pair.ratio <= a ? 1.0 : 0.0;
      out[2 * j + 1] = scale * (in_a - in_ratio);
    }
  };
  const auto stats =
      run_batch(config.n_samples, config.threads, 2 * as.size(), eval);
  std::vector<IdentityReport> reports;
  reports.reserve(as.size());
  for (std::size_t j = 0; j < as.size(); ++j) {
    reports.push_back(make_report(IdentityId::Density,
                                  stats.columns[2 * j].estimate(),
                                  stats.columns[2 * j + 1].estimate()));
  }
  return reports;
}

DensityGridResult density_grid(double t, std::span<const double> a_grid,
                               const McConfig& config) {
  validate(config);
  require_time(t);
  require(a_grid.size() >= 2, "density_grid: need at least 2 grid points");
  for (std::size_t j = 0; j < a_grid.size(); ++j) {
    require_level(a_grid[j]);
    if (j > 0) require(a_grid[j] > a_grid[j - 1], "density_grid: grid must ascend");
  }

  const std::uint64_t n = config.n_samples;
  const std::size_t m = a_grid.size();
  const std::size_t n_blocks =
      static_cast<std::size_t>(std::min<std::uint64_t>(kTrimmedBlocks, n));
  const auto key = StreamKey::derive(config.seed, config.stream, kSubDensity);

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const unsigned n_threads = config.threads == 0 ? hw : config.threads;

  // Hit counts are integers, so cross-thread merging is exact and
  // order-independent; block boundaries are fixed by path index.
  const std::size_t width = m + 1;  // difference-array columns
  std::vector<std::vector<std::uint64_t>> thread_counts(
      n_threads, std::vector<std::uint64_t>(n_blocks * width, 0));

  constexpr std::uint64_t kChunk = 16384;
  const std::uint64_t n_chunks = (n + kChunk - 1) / kChunk;
  std::atomic<std::uint64_t> next{0};
  auto worker = [&](unsigned tid) {
    auto& counts = thread_counts[tid];
    for (;;) {
      const std::uint64_t c = next.fetch_add(1);
      if (c >= n_chunks) break;
      const std::uint64_t lo = c * kChunk;
      const std::uint64_t hi = std::min(n, lo + kChunk);
      for (std::uint64_t i = lo; i < hi; ++i) {
        NormalStream normals(key.path_engine(i), config.zero_increments);
        const auto pair =
            simulate_density_pair(t, config.steps, config.scheme, normals);
        const std::size_t block = block_of_index(i, n, n_blocks);
        const auto first = static_cast<std::size_t>(
            std::lower_bound(a_grid.begin(), a_grid.end(), pair.lower) -
            a_grid.begin());
        const auto last = static_cast<std::size_t>(
            std::lower_bound(a_grid.begin(), a_grid.end(), pair.upper) -
            a_grid.begin());
        if (first < last) {
          ++counts[block * width + first];
          --counts[block * width + last];
        }
      }
    }
  };
  if (n_threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned tid = 0; tid < n_threads; ++tid) pool.emplace_back(worker, tid);
    for (auto& th : pool) th.join();
  }

  std::vector<std::uint64_t> block_counts(n_blocks * width, 0);
  for (const auto& counts : thread_counts) {
    for (std::size_t idx = 0; idx < counts.size(); ++idx) {
      block_counts[idx] += counts[idx];
    }
  }

  DensityGridResult result;
  result.points.resize(m);
  std::vector<double> block_means(n_blocks);
  for (std::size_t j = 0; j < m; ++j) {
    const double scale = 2.0 / (a_grid[j] * a_grid[j]);
    std::uint64_t hits = 0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      std::uint64_t block_hits = 0;
      // prefix of the difference array up to column j
      for (std::size_t q = 0; q <= j; ++q) {
        block_hits += block_counts[b * width + q];
      }
      const std::uint64_t b_lo = n * b / n_blocks;
      const std::uint64_t b_hi = n * (b + 1) / n_blocks;
      block_means[b] =
          scale * static_cast<double>(block_hits) / static_cast<double>(b_hi - b_lo);
      hits += block_hits;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    EstimateWithCI& e = result.points[j].event;
    result.points[j].a = a_grid[j];
    e.mean = scale * p;
    e.n_samples = n;
    e.stderr_ =
        n > 1 ? scale * std::sqrt(p * (1.0 - p) / static_cast<double>(n - 1))
              : 0.0;
    e.max_sample = hits > 0 ? scale : 0.0;
    std::vector<double> sorted = block_means;
    std::sort(sorted.begin(), sorted.end());
    e.trimmed_mean = (n_blocks % 2 == 1)
                         ? sorted[n_blocks / 2]
                         : 0.5 * (sorted[n_blocks / 2 - 1] + sorted[n_blocks / 2]);
  }

  double integral = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    integral += 0.5 *
                (result.points[j].event.mean + result.points[j + 1].event.mean) *
                (a_grid[j + 1] - a_grid[j]);
  }
  result.integral = integral;
  return result;
}

MomentDiagnostics exp_moment(double t, double theta, MomentVariant variant,
                             const McConfig& config) {
  validate(config);
  require_time(t);
  require(std::isfinite(theta), "theta must be finite");

  const auto key = StreamKey::derive(config.seed, config.stream, kSubMoment);
  auto eval = [&](std::uint64_t i, double* out) {
    NormalStream normals(key.path_engine(i), config.zero_increments);
    double exponent = 0.0;
    switch (variant) {
      case MomentVariant::NoDrift: {
        const auto f =
            integrate_exp(1.0, 0.0, t, config.steps, config.scheme, normals);
        exponent = theta / f.integral;
        break;
      }
      case MomentVariant::HalfDrift: {
        const auto f =
            integrate_exp(1.0, -0.5, t, config.steps, config.scheme, normals);
        exponent = theta * 2.0 / f.integral;
        break;
      }
      case MomentVariant::RatioMoverA: {
        const auto f =
            integrate_exp(1.0, -0.5, t, config.steps, config.scheme, normals);
        exponent = theta * std::exp(f.terminal_log - 0.5 * t) / f.integral;
        break;
      }
    }
    out[0] = std::exp(exponent);
  };
  const auto stats = run_batch(config.n_samples, config.threads, 1, eval, true);

  MomentDiagnostics diag;
  diag.estimate = stats.columns[0].estimate();
  diag.running_ns = stats.checkpoint_ns;
  diag.running_means = stats.checkpoint_means;

  const double total =
      diag.estimate.mean * static_cast<double>(diag.estimate.n_samples);
  diag.single_sample_domination =
      total > 0.0 && diag.estimate.max_sample > 0.5 * total;

  const bool window_complete =
      diag.running_ns.size() == 5 && diag.running_ns.front() == (1ull << 16) &&
      diag.running_ns.back() == (1ull << 20);
  bool all_up = window_complete;
  bool all_flat = window_complete;
  bool net_growth = false;
  if (window_complete) {
    for (std::size_t k = 0; k + 1 < diag.running_means.size(); ++k) {
      const double prev = diag.running_means[k];
      const double next = diag.running_means[k + 1];
      if (prev <= 0.0) {
        all_up = all_flat = false;
        break;
      }
      const double ratio = next / prev;
      if (!(ratio > 1.10)) all_up = false;
      if (!(std::abs(ratio - 1.0) < 0.02)) all_flat = false;
    }
    // Tail events make the running mean jump and then dilute, so the
    // per-doubling test alone misses many divergent runs; net growth over
    // the window at the same 10%-per-doubling rate catches those.
    const double first = diag.running_means.front();
    const double last = diag.running_means.back();
    net_growth = first > 0.0 && last / first > 1.1 * 1.1 * 1.1 * 1.1;
  }
  diag.diverging = diag.single_sample_domination || all_up || net_growth;
  diag.stabilized = all_flat;
  return diag;
}

IdentityReport measure_change_check(double t, double y, MeasureChangeF f,
                                    double nu, const McConfig& config) {
  validate(config);
  require_time(t);
  require(std::isfinite(y) && y > 0.0, "y must be finite and > 0");
  require(std::isfinite(nu), "nu must be finite");

  auto apply_f = [f, nu](double x, double z) {
    switch (f) {
      case MeasureChangeF::One: return 1.0;
      case MeasureChangeF::X: return x;
      case MeasureChangeF::XOverNegZ: return x / (-z);
      case MeasureChangeF::XPowNu: return std::pow(x, nu);
    }
    return 0.0;
  };

  const double blow_at = 2.0 / y;
  const auto lhs_key = StreamKey::derive(config.seed, config.stream, kSubMeasureLhs);
  auto lhs_eval = [&](std::uint64_t i, double* out) {
    NormalStream normals(lhs_key.path_engine(i), config.zero_increments);
    const auto s = integrate_exp(1.0, -0.5, t, config.steps, config.scheme,
                                 normals);
    if (s.integral < blow_at) {
      const double m = std::exp(s.terminal_log - 0.5 * t);
      const double r = -m / (1.0 / y - 0.5 * s.integral);
      out[0] = apply_f(m, r);
    } else {
      out[0] = 0.0;
    }
  };
  const auto lhs = run_batch(config.n_samples, config.threads, 1, lhs_eval)
                       .columns[0]
                       .estimate();

  const auto rhs_key = StreamKey::derive(config.seed, config.stream, kSubMeasureRhs);
  auto rhs_eval = [&](std::uint64_t i, double* out) {
    NormalStream normals(rhs_key.path_engine(i), config.zero_increments);
    const auto s = integrate_exp(1.0, -0.5, t, config.steps, config.scheme,
                                 normals);
    const double m = std::exp(s.terminal_log - 0.5 * t);
    const double half_a = 0.5 * s.integral;
    const double x = m / ((1.0 + y * half_a) * (1.0 + y * half_a));
    const double z = -m / (1.0 / y + half_a);
    out[0] = apply_f(x, z) * std::exp(m / (1.0 / y + half_a) - y);
  };
  const auto rhs = run_batch(config.n_samples, config.threads, 1, rhs_eval)
                       .columns[0]
                       .estimate();

  return make_report(IdentityId::MeasureChange, lhs, rhs);
}

namespace {

detail::CappedEstimates super_lhs_core(double t, double y,
                                       std::size_t time_index,
                                       const McConfig& config,
                                       const double* cap) {
  const auto key =
      StreamKey::derive(config.seed, config.stream, kSubSuperLhs | time_index);
  const std::size_t cols = cap ? 2 : 1;
  auto eval = [&](std::uint64_t p, double* out) {
    NormalStream normals(key.path_engine(p), config.zero_increments);
    const auto s = integrate_exp(1.0, -0.5, t, config.steps, config.scheme,
                                 normals);
    const double m = std::exp(s.terminal_log - 0.5 * t);
    const double z = std::exp(m / (1.0 / y + 0.5 * s.integral));
    out[0] = z;
    if (cols == 2) out[1] = std::min(z, *cap);
  };
  const auto stats = run_batch(config.n_samples, config.threads, cols, eval);
  detail::CappedEstimates result;
  result.full = stats.columns[0].estimate();
  if (cols == 2) result.capped = stats.columns[1].estimate();
  return result;
}

}  // namespace

namespace detail {

CappedEstimates super_lhs_capped(double t, double y, std::size_t time_index,
                                 const McConfig& config, double cap) {
  validate(config);
  require_time(t);
  require(std::isfinite(y) && y > 0.0, "y must be finite and > 0");
  require(cap > 0.0, "cap must be > 0");
  return super_lhs_core(t, y, time_index, config, &cap);
}

EstimateWithCI super_rhs(double t, double y, std::size_t time_index,
                         const McConfig& config) {
  validate(config);
  require_time(t);
  require(std::isfinite(y) && y > 0.0, "y must be finite and > 0");
  return cdf_direct_sub(t, 2.0 / y, 0.0, config, kSubSuperRhs | time_index)
      .affine(std::exp(y));
}

}  // namespace detail

SupermartingaleResult supermartingale_check(double y,
                                            std::span<const double> times,
                                            const McConfig& config) {
  validate(config);
  require(std::isfinite(y) && y > 0.0, "y must be finite and > 0");
  require(!times.empty(), "times must be nonempty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(std::isfinite(times[i]) && times[i] > 0.0, "times must be > 0");
    if (i > 0) {
      require(times[i] > times[i - 1], "times must be strictly increasing");
    }
  }

  SupermartingaleResult result;
  result.times.assign(times.begin(), times.end());
  const double level = 2.0 / y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const auto lhs = super_lhs_core(t, y, i, config, nullptr).full;
    const auto rhs =
        detail::cdf_direct_sub(t, level, 0.0, config, kSubSuperRhs | i)
            .affine(std::exp(y));
    result.reports.push_back(
        make_report(IdentityId::Supermartingale, lhs, rhs));
  }

  result.decreasing = true;
  for (std::size_t i = 0; i + 1 < result.reports.size(); ++i) {
    if (!(result.reports[i].lhs.mean > result.reports[i + 1].lhs.mean)) {
      result.decreasing = false;
    }
  }
  return result;
}

std::vector<LowerTailPoint> lower_tail_probe(double t,
                                             std::span<const double> a_grid,
                                             const McConfig& config) {
  validate(config);
  require_time(t);
  require(!a_grid.empty(), "lower_tail_probe: empty grid");
  for (std::size_t j = 0; j < a_grid.size(); ++j) {
    require_level(a_grid[j]);
    if (j > 0) {
      require(a_grid[j] < a_grid[j - 1],
              "lower_tail_probe: grid must strictly decrease");
    }
  }

  // One shared batch of A_t^{(1/2)} = int exp(B_s) ds samples; each grid
  // point reads its own empirical tail from the same sample.
  const auto key = StreamKey::derive(config.seed, config.stream, kSubLowerTail);
  auto eval = [&](std::uint64_t i, double* out) {
    NormalStream normals(key.path_engine(i), config.zero_increments);
    const auto f =
        integrate_exp(1.0, 0.0, t, config.steps, config.scheme, normals);
    for (std::size_t j = 0; j < a_grid.size(); ++j) {
      out[j] = f.integral <= a_grid[j] ? 1.0 : 0.0;
    }
  };
  const auto stats =
      run_batch(config.n_samples, config.threads, a_grid.size(), eval);

  std::vector<LowerTailPoint> points(a_grid.size());
  for (std::size_t j = 0; j < a_grid.size(); ++j) {
    const auto est = stats.columns[j].estimate();
    LowerTailPoint& pt = points[j];
    pt.a = a_grid[j];
    pt.probability = est.mean;
    pt.prob_stderr = est.stderr_;
    const double log_prefactor = 2.0 / pt.a - std::log(pt.a);
    const double prefactor = std::exp(log_prefactor);
    pt.value = prefactor * est.mean;
    pt.ci_low = prefactor * std::max(0.0, est.mean - est.stderr_);
    pt.ci_high = prefactor * (est.mean + est.stderr_);
    pt.censored = est.mean == 0.0;
  }
  return points;
}

}  // namespace gbm
