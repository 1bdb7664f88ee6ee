#include "gbm/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gbm/estimators.hpp"
#include "gbm/oracles.hpp"
#include "gbm/pricing.hpp"

namespace gbm {

namespace {

constexpr double kTimes[] = {0.25, 1.0, 4.0};
constexpr double kLevels[] = {0.5, 1.0, 2.0};

// Identity right-hand sides here are likelihood-ratio-like: their means are
// finite but tail-dominated, and at fixed n the sample stderr can be an
// underestimate by orders of magnitude. The share of the second moment
// carried by the single largest sample diagnoses this: a CLT-valid cell at
// n = 10^6 sits near 1e-5, so anything above kTailShareLimit invalidates the
// z denominator. Such cells are flagged and assert the one-sided capped
// bound E[min(X, c)] <= E[X] instead, whose integrand is bounded by
// construction; the raw z and tail diagnostics are still reported.
constexpr double kTailShareLimit = 0.05;
constexpr double kTailCap = 32.0;

double top_sample_share(const EstimateWithCI& e) {
  if (e.n_samples < 2 || e.stderr_ <= 0.0) return 0.0;
  const double n = static_cast<double>(e.n_samples);
  const double total_sq = e.stderr_ * e.stderr_ * n * (n - 1.0);
  const double dev = e.max_sample - e.mean;
  return dev * dev / total_sq;
}

bool tail_healthy(const EstimateWithCI& e) {
  return top_sample_share(e) <= kTailShareLimit;
}

struct CellVerdict {
  bool pass = false;
  bool gated_z = false;  // true: |z| <= 3 asserted; false: capped bound asserted
  double z = 0.0;
};

// bounded_side: the estimator with a bounded integrand (direct frequency or
// scaled frequency); heavy_full/heavy_capped: the identity side and its
// capped companion on the same paths.
CellVerdict judge_cell(const EstimateWithCI& bounded_side,
                       const detail::CappedEstimates& heavy,
                       const IdentityReport& report) {
  CellVerdict verdict;
  verdict.z = report.z_score;
  verdict.gated_z = tail_healthy(bounded_side) && tail_healthy(heavy.full);
  if (verdict.gated_z) {
    verdict.pass = report.pass;
  } else {
    const double slack =
        3.0 * std::hypot(bounded_side.stderr_, heavy.capped.stderr_);
    verdict.pass = bounded_side.mean - heavy.capped.mean >= -slack;
  }
  return verdict;
}

std::string gate_detail(int gated, int flagged, double max_gated_z,
                        bool capped_ok) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%d cells z-gated (max|z|=%.2f), %d heavy-tail flagged "
                "(one-sided capped bound %s)",
                gated, max_gated_z, flagged, capped_ok ? "ok" : "VIOLATED");
  return buf;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

McConfig base_config(const AcceptanceOptions& options, std::uint64_t stream) {
  McConfig cfg;
  cfg.n_samples = options.n;
  cfg.steps = options.steps;
  cfg.seed = options.seed;
  cfg.stream = stream;
  cfg.threads = options.threads;
  return cfg;
}

void emit(std::vector<CriterionResult>& results, const CriterionCallback& cb,
          CriterionResult r) {
  if (cb) cb(r);
  results.push_back(std::move(r));
}

CriterionResult cdf_grid(const AcceptanceOptions& options, int criterion,
                         std::vector<double> nus) {
  CriterionResult result;
  result.criterion = criterion;
  result.name = criterion == 1 ? "cdf identity grid" : "drifted cdf identity grid";
  double max_gated_z = 0.0;
  int gated = 0, flagged = 0;
  bool pass = true, capped_ok = true;
  std::uint64_t stream = static_cast<std::uint64_t>(criterion) * 1000;
  for (double nu : nus) {
    for (double t : kTimes) {
      const auto cfg = base_config(options, stream++);
      const auto directs = cdf_direct_many(t, kLevels, nu, cfg);
      for (std::size_t j = 0; j < std::size(kLevels); ++j) {
        const double a = kLevels[j];
        auto id_cfg = base_config(options, stream++);
        const auto identity =
            detail::cdf_identity_capped(t, a, nu, id_cfg, kTailCap);
        const auto report = make_report(
            nu == 0.0 ? IdentityId::CdfNoDrift : IdentityId::CdfDrift,
            directs[j], identity.full);
        const auto verdict = judge_cell(directs[j], identity, report);
        pass = pass && verdict.pass;
        if (verdict.gated_z) {
          ++gated;
          max_gated_z = std::max(max_gated_z, std::abs(verdict.z));
        } else {
          ++flagged;
          capped_ok = capped_ok && verdict.pass;
        }
        auto rows = report_records(
            report, "cdf.direct",
            nu == 0.0 ? "cdf.identity" : "cdf.identity_drift", t, a, nu);
        rows[0].pass = verdict.pass;
        rows[1].pass = verdict.pass;
        result.records.insert(result.records.end(), rows.begin(), rows.end());
      }
    }
  }
  result.pass = pass;
  result.detail = gate_detail(gated, flagged, max_gated_z, capped_ok);
  return result;
}

CriterionResult density_criterion(const AcceptanceOptions& options) {
  CriterionResult result;
  result.criterion = 3;
  result.name = "density consistency + normalization";
  double max_z = 0.0;
  bool pass = true;
  std::uint64_t stream = 3000;
  for (double t : kTimes) {
    const auto cfg = base_config(options, stream++);
    const auto reports = density_check_many(t, kLevels, cfg);
    for (std::size_t j = 0; j < reports.size(); ++j) {
      max_z = std::max(max_z, std::abs(reports[j].z_score));
      pass = pass && reports[j].pass;
      auto rows = report_records(reports[j], "density.event",
                                 "density.difference", t, kLevels[j], 0.0);
      result.records.insert(result.records.end(), rows.begin(), rows.end());
    }
  }

  // 256-point log grid on [0.01, 20]; the density there integrates to 1
  // minus the tail mass above 20.
  std::vector<double> grid(256);
  const double lo = 0.01, hi = 20.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    grid[j] = lo * std::pow(hi / lo, static_cast<double>(j) /
                                         static_cast<double>(grid.size() - 1));
  }
  const auto cfg = base_config(options, stream++);
  const auto grid_result = density_grid(1.0, grid, cfg);
  const bool integral_ok =
      grid_result.integral >= 0.97 && grid_result.integral <= 1.01;
  pass = pass && integral_ok;

  Record integral_row;
  integral_row.id = "density.integral";
  integral_row.t = 1.0;
  integral_row.n = cfg.n_samples;
  integral_row.estimate = grid_result.integral;
  integral_row.pass = integral_ok;
  result.records.push_back(integral_row);

  result.pass = pass;
  result.detail = "max|z|=" + fmt("%.2f", max_z) +
                  ", integral=" + fmt("%.4f", grid_result.integral);
  return result;
}

CriterionResult supermartingale_criterion(const AcceptanceOptions& options) {
  CriterionResult result;
  result.criterion = 4;
  result.name = "supermartingale identity + strict decrease";
  const double ys[] = {0.5, 1.0, 2.0};
  const double times[] = {0.5, 1.0, 2.0};
  double max_gated_z = 0.0;
  int gated = 0, flagged = 0;
  bool pass = true, capped_ok = true, decrease_ok = true;
  std::uint64_t stream = 4000;
  for (double y : ys) {
    const auto cfg = base_config(options, stream++);
    const double cap = kTailCap * std::exp(y);
    bool all_healthy = true;
    std::vector<detail::CappedEstimates> lhs(std::size(times));
    for (std::size_t i = 0; i < std::size(times); ++i) {
      lhs[i] = detail::super_lhs_capped(times[i], y, i, cfg, cap);
      const auto rhs = detail::super_rhs(times[i], y, i, cfg);
      const auto report =
          make_report(IdentityId::Supermartingale, lhs[i].full, rhs);
      // bounded side is the scaled frequency (rhs); heavy side is lhs
      CellVerdict verdict;
      verdict.z = report.z_score;
      verdict.gated_z = tail_healthy(rhs) && tail_healthy(lhs[i].full);
      if (verdict.gated_z) {
        verdict.pass = report.pass;
        ++gated;
        max_gated_z = std::max(max_gated_z, std::abs(verdict.z));
      } else {
        const double slack = 3.0 * std::hypot(rhs.stderr_, lhs[i].capped.stderr_);
        verdict.pass = rhs.mean - lhs[i].capped.mean >= -slack;
        ++flagged;
        capped_ok = capped_ok && verdict.pass;
      }
      all_healthy = all_healthy && tail_healthy(lhs[i].full);
      pass = pass && verdict.pass;
      auto rows = report_records(report, "super.mean_z", "super.scaled_cdf",
                                 times[i], 2.0 / y, std::nullopt);
      rows[0].pass = verdict.pass;
      rows[1].pass = verdict.pass;
      result.records.insert(result.records.end(), rows.begin(), rows.end());
    }
    // Strict decrease of E[Z_t]. With an unhealthy tail the raw means are
    // noise-dominated, so the check runs on the capped means: min(Z, c) is a
    // nondecreasing concave transform of a supermartingale and therefore a
    // supermartingale itself.
    bool decreasing = true;
    for (std::size_t i = 0; i + 1 < std::size(times); ++i) {
      const double lo = all_healthy ? lhs[i].full.mean : lhs[i].capped.mean;
      const double hi =
          all_healthy ? lhs[i + 1].full.mean : lhs[i + 1].capped.mean;
      decreasing = decreasing && lo > hi;
    }
    decrease_ok = decrease_ok && decreasing;
    pass = pass && decreasing;
    Record mono;
    mono.id = all_healthy ? "super.decreasing" : "super.decreasing_capped";
    mono.a = 2.0 / y;
    mono.n = cfg.n_samples;
    mono.estimate = decreasing ? 1.0 : 0.0;
    mono.pass = decreasing;
    result.records.push_back(mono);
  }
  result.pass = pass;
  result.detail = gate_detail(gated, flagged, max_gated_z, capped_ok) +
                  std::string(", strict decrease ") +
                  (decrease_ok ? "holds" : "VIOLATED");
  return result;
}

CriterionResult price_criterion(const AcceptanceOptions& options) {
  CriterionResult result;
  result.criterion = 5;
  result.name = "asian price identity";
  double max_gated_z = 0.0;
  int gated = 0, flagged = 0;
  bool pass = true, capped_ok = true;
  std::uint64_t stream = 5000;
  for (double a : kLevels) {
    OptionSpec spec;
    spec.strike = a;
    const auto cfg = base_config(options, stream++);
    const auto direct = price_direct(spec, cfg);
    const double cap_v = kTailCap * (1.0 + spec.horizon) / (a * a);
    const auto identity = detail::price_identity_capped(spec, cfg, cap_v);
    const auto report =
        make_report(IdentityId::AsianPrice, direct, identity.full);
    const auto verdict = judge_cell(direct, identity, report);
    pass = pass && verdict.pass;
    if (verdict.gated_z) {
      ++gated;
      max_gated_z = std::max(max_gated_z, std::abs(verdict.z));
    } else {
      ++flagged;
      capped_ok = capped_ok && verdict.pass;
    }
    auto rows = report_records(report, "price.direct", "price.identity", 1.0,
                               a, std::nullopt);
    rows[0].pass = verdict.pass;
    rows[1].pass = verdict.pass;
    result.records.insert(result.records.end(), rows.begin(), rows.end());
  }

  // a -> 0: the price collapses to E[A_t] = t. The identity route is exact
  // up to the deterministic strike offset, so that offset joins its band.
  OptionSpec tiny;
  tiny.strike = 1e-8;
  const auto cfg = base_config(options, stream++);
  const auto d = price_direct(tiny, cfg);
  const auto i = price_identity(tiny, cfg);
  const bool direct_ok = std::abs(d.mean - 1.0) <= 3.0 * d.stderr_;
  const bool identity_ok =
      std::abs(i.mean - 1.0) <= 3.0 * i.stderr_ + tiny.strike * (1.0 + 1e-6);
  pass = pass && direct_ok && identity_ok;

  Record rd = make_record("price.direct", 1.0, tiny.strike, std::nullopt, d);
  rd.pass = direct_ok;
  Record ri = make_record("price.identity", 1.0, tiny.strike, std::nullopt, i);
  ri.pass = identity_ok;
  result.records.push_back(rd);
  result.records.push_back(ri);

  result.pass = pass;
  result.detail = gate_detail(gated, flagged, max_gated_z, capped_ok) +
                  ", a->0 direct=" + fmt("%.5f", d.mean) +
                  " identity=" + fmt("%.9f", i.mean);
  return result;
}

CriterionResult yor_criterion(const AcceptanceOptions& options) {
  CriterionResult result;
  result.criterion = 6;
  result.name = "yor closed-form oracle";
  const std::pair<double, double> cases[] = {{0.0, 1.0}, {0.0, 4.0}, {1.0, 1.0}};
  double max_z = 0.0;
  bool pass = true;
  std::uint64_t stream = 6000;
  for (auto [u, t] : cases) {
    const auto cfg = base_config(options, stream++);
    const auto report = yor_mc_check(u, t, cfg);
    max_z = std::max(max_z, std::abs(report.z_score));
    pass = pass && report.pass;
    auto rows = report_records(report, "yor.mc", "yor.closed_form", t, u,
                               std::nullopt);
    result.records.insert(result.records.end(), rows.begin(), rows.end());
  }
  result.pass = pass;
  result.detail = "max|z|=" + fmt("%.2f", max_z);
  return result;
}

CriterionResult dufresne_criterion(const AcceptanceOptions& options) {
  CriterionResult result;
  result.criterion = 7;
  result.name = "dufresne gamma-law oracle";
  auto cfg = base_config(options, 7000);
  cfg.n_samples = std::min<std::uint64_t>(options.n, 100000);
  cfg.steps = std::max<std::int64_t>(options.steps, 4096);
  const GammaLawSpec law{2.0};
  const auto positive = dufresne_ks_check(law, 20.0, cfg);

  auto neg_cfg = cfg;
  neg_cfg.stream = 7001;
  const auto negative = dufresne_ks_check_against(GammaLawSpec{4.0}, 2.0, 20.0,
                                                  neg_cfg);
  result.pass = positive.pass && !negative.pass;

  Record pos_row;
  pos_row.id = "dufresne.ks";
  pos_row.t = positive.horizon;
  pos_row.n = positive.n;
  pos_row.estimate = positive.statistic;
  pos_row.stderr_ = positive.threshold;
  pos_row.pass = positive.pass;
  Record neg_row;
  neg_row.id = "dufresne.ks_wrong_mu";
  neg_row.t = negative.horizon;
  neg_row.n = negative.n;
  neg_row.estimate = negative.statistic;
  neg_row.stderr_ = negative.threshold;
  neg_row.pass = !negative.pass;
  result.records.push_back(pos_row);
  result.records.push_back(neg_row);

  result.detail = "D=" + fmt("%.4f", positive.statistic) + " thr=" +
                  fmt("%.4f", positive.threshold) + "; wrong-mu D=" +
                  fmt("%.3f", negative.statistic) + " fails as required";
  return result;
}

Record moment_row(const char* id, double t, double theta,
                  const MomentDiagnostics& diag) {
  Record row = make_record(id, t, std::nullopt, std::nullopt, diag.estimate);
  row.a = theta;
  return row;
}

CriterionResult moment_criterion(const AcceptanceOptions& options) {
  CriterionResult result;
  result.criterion = 8;
  result.name = "exponential moment thresholds";
  auto cfg = base_config(options, 8000);
  cfg.n_samples = 1ull << 20;

  const auto stable = exp_moment(1.0, 1.0, MomentVariant::NoDrift, cfg);
  auto cfg2 = cfg;
  cfg2.stream = 8004;
  const auto divergent = exp_moment(1.0, 2.5, MomentVariant::NoDrift, cfg2);
  auto cfg3 = cfg;
  cfg3.stream = 8002;
  const auto boundary = exp_moment(1.0, 2.0, MomentVariant::RatioMoverA, cfg3);
  auto cfg4 = cfg;
  cfg4.stream = 8003;
  const auto boundary_nd = exp_moment(1.0, 2.0, MomentVariant::NoDrift, cfg4);

  result.pass = stable.stabilized && divergent.diverging;

  Record r1 = moment_row("moment.no_drift", 1.0, 1.0, stable);
  r1.pass = stable.stabilized;
  Record r2 = moment_row("moment.no_drift", 1.0, 2.5, divergent);
  r2.pass = divergent.diverging;
  // theta = 2 probes are reported, never asserted
  result.records.push_back(r1);
  result.records.push_back(r2);
  result.records.push_back(moment_row("moment.ratio_m_over_a", 1.0, 2.0, boundary));
  result.records.push_back(moment_row("moment.no_drift", 1.0, 2.0, boundary_nd));

  result.detail =
      std::string("theta=1 stabilizes: ") + (stable.stabilized ? "yes" : "NO") +
      "; theta=2.5 divergence fires: " + (divergent.diverging ? "yes" : "NO") +
      "; theta=2 (M/A) mean=" + fmt("%.3f", boundary.estimate.mean) +
      " domination=" + (boundary.single_sample_domination ? "yes" : "no") +
      " (reported only)";
  return result;
}

CriterionResult determinism_criterion(const AcceptanceOptions& options) {
  CriterionResult result;
  result.criterion = 9;
  result.name = "byte determinism across thread counts";

  auto run_once = [&](unsigned threads) {
    auto cfg = base_config(options, 9000);
    cfg.threads = threads;
    const auto report = cdf_check(1.0, 1.0, 0.0, cfg);
    return to_csv(report_records(report, "cdf.direct", "cdf.identity", 1.0,
                                 1.0, 0.0));
  };
  const std::string csv_t1 = run_once(1);
  const std::string csv_t8 = run_once(8);
  const std::string csv_t8_again = run_once(8);
  result.pass = csv_t1 == csv_t8 && csv_t8 == csv_t8_again;

  Record row;
  row.id = "determinism.csv_bytes";
  row.t = 1.0;
  row.a = 1.0;
  row.n = options.n;
  row.estimate = result.pass ? 1.0 : 0.0;
  row.pass = result.pass;
  result.records.push_back(row);

  result.detail = result.pass ? "threads {1,8} and repeat: identical bytes"
                              : "outputs differ across thread counts";
  return result;
}

CriterionResult residual_criterion(const AcceptanceOptions& options) {
  CriterionResult result;
  result.criterion = 10;
  result.name = "girsanov sde residual halves under refinement";

  PathConfig coarse;
  coarse.horizon = 1.0;
  coarse.steps = options.steps;
  coarse.drift = 0.0;
  coarse.seed = options.seed;
  PathConfig fine = coarse;
  fine.steps = 2 * coarse.steps;

  const double y = 1.0;
  const double dt = coarse.horizon / static_cast<double>(coarse.steps);
  const auto inc_key = StreamKey::derive(options.seed, 10000, 1);
  const auto mid_key = StreamKey::derive(options.seed, 10000, 2);

  std::vector<double> coarse_res, fine_res;
  for (std::uint64_t i = 0; coarse_res.size() < 1000 && i < 5000; ++i) {
    NormalStream normals(inc_key.path_engine(i));
    const auto increments =
        draw_increments(coarse.horizon, coarse.steps, normals);
    const double rc = girsanov_residual(coarse, increments, y);
    if (std::isnan(rc)) continue;
    NormalStream midpoints(mid_key.path_engine(i));
    const auto refined = bridge_refine(increments, dt, midpoints);
    const double rf = girsanov_residual(fine, refined, y);
    if (std::isnan(rf)) continue;
    coarse_res.push_back(rc);
    fine_res.push_back(rf);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
  };
  const double mc = median(coarse_res);
  const double mf = median(fine_res);
  const double factor = mc / mf;
  result.pass = coarse_res.size() >= 1000 && factor >= 1.2 && factor <= 3.0;

  Record row;
  row.id = "residual.halving_factor";
  row.t = coarse.horizon;
  row.n = coarse_res.size();
  row.estimate = factor;
  row.pass = result.pass;
  result.records.push_back(row);

  result.detail = "median " + fmt("%.3e", mc) + " -> " + fmt("%.3e", mf) +
                  ", factor=" + fmt("%.2f", factor) + " (accept [1.2, 3])";
  return result;
}

}  // namespace

bool all_asserted_pass(const std::vector<CriterionResult>& results) {
  for (const auto& r : results) {
    if (r.asserted && !r.pass) return false;
  }
  return true;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options,
                                            const CriterionCallback& on_result) {
  std::vector<CriterionResult> results;
  emit(results, on_result, cdf_grid(options, 1, {0.0}));
  emit(results, on_result, cdf_grid(options, 2, {-0.5, 0.5}));
  emit(results, on_result, density_criterion(options));
  emit(results, on_result, supermartingale_criterion(options));
  emit(results, on_result, price_criterion(options));
  emit(results, on_result, yor_criterion(options));
  emit(results, on_result, dufresne_criterion(options));
  emit(results, on_result, moment_criterion(options));
  emit(results, on_result, determinism_criterion(options));
  emit(results, on_result, residual_criterion(options));
  return results;
}

}  // namespace gbm
