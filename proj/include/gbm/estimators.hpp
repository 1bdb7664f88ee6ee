#pragma once

#include <span>
#include <vector>

#include "gbm/paths.hpp"
#include "gbm/stats.hpp"

namespace gbm {

// Shared Monte Carlo run configuration. (seed, stream) select the random
// stream family; every estimator salts in its own substream so paired
// estimators of an identity are statistically independent unless an identity
// is defined on shared increments (the density pair).
struct McConfig {
  std::uint64_t n_samples = 1'000'000;
  std::int64_t steps = 2048;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  Scheme scheme = Scheme::Trapezoid;
  unsigned threads = 0;          // 0 = hardware concurrency
  bool zero_increments = false;  // test hook: every Gaussian increment is 0
};
void validate(const McConfig& config);

// Empirical frequency of {A_t^{(nu)} <= a}.
EstimateWithCI cdf_direct(double t, double a, double nu, const McConfig& config);

// e^{-2/a} E[exp(2 M_t / (a + A_t))], the distribution identity for nu = 0.
EstimateWithCI cdf_identity(double t, double a, const McConfig& config);

// a^{2nu} e^{-2/a} E[(a + A)^{-2nu} exp(2 exp(B_t + nu t - t/2)/(a + A))],
// the drifted distribution identity; collapses to cdf_identity at nu = 0.
EstimateWithCI cdf_identity_drift(double t, double a, double nu,
                                  const McConfig& config);

// cdf_direct vs cdf_identity(_drift) on independent substreams.
IdentityReport cdf_check(double t, double a, double nu, const McConfig& config);

// (2/a^2) Pr{ int exp(B - s/2) <= a < int exp(B + s/2) }, both integrals on
// shared increments.
EstimateWithCI density_event(double t, double a, const McConfig& config);

// (2/a^2) (Pr{A_t <= a} - Pr{A_t/M_t <= a}) on the same increments as
// density_event (common random numbers sharpen the cross-check).
EstimateWithCI density_difference(double t, double a, const McConfig& config);

IdentityReport density_check(double t, double a, const McConfig& config);

// One shared batch serving several levels a (cdf: one direct batch per (t,nu);
// density: one dual-integral batch per t). Per-level estimates keep the full
// n; levels are correlated through the common sample.
std::vector<EstimateWithCI> cdf_direct_many(double t, std::span<const double> as,
                                            double nu, const McConfig& config);
std::vector<IdentityReport> density_check_many(double t,
                                               std::span<const double> as,
                                               const McConfig& config);

struct DensityGridPoint {
  double a = 0.0;
  EstimateWithCI event;
};
struct DensityGridResult {
  std::vector<DensityGridPoint> points;
  double integral = 0.0;  // trapezoid of the event density over the grid
};
// Event-density estimates over an ascending grid from one shared batch.
DensityGridResult density_grid(double t, std::span<const double> a_grid,
                               const McConfig& config);

enum class MomentVariant { NoDrift, HalfDrift, RatioMoverA };
const char* to_string(MomentVariant v);

struct MomentDiagnostics {
  EstimateWithCI estimate;
  std::vector<std::uint64_t> running_ns;  // 2^16..2^20 clipped to n
  std::vector<double> running_means;
  bool single_sample_domination = false;  // max_sample > half the total sum
  bool diverging = false;     // means rise >10% at every doubling, or domination
  bool stabilized = false;    // means change <2% at every doubling
};

// Sample mean of exp(theta * X) where variant selects X:
//   NoDrift     1 / int_0^t exp(B_s) ds
//   HalfDrift   2 / A_t
//   RatioMoverA M_t / A_t
// An infinite mean cannot be proven by simulation; the divergence indicator
// is the documented operational proxy.
MomentDiagnostics exp_moment(double t, double theta, MomentVariant variant,
                             const McConfig& config);

enum class MeasureChangeF { One, X, XOverNegZ, XPowNu };
const char* to_string(MeasureChangeF f);

// E[f(M_t, R_t); A_t < 2/y] against the change-of-measure form
// E[f(M/(1+yA/2)^2, -M/(1/y + A/2)) exp(M/(1/y + A/2) - y)].
// nu is the exponent parameter, used only by XPowNu.
IdentityReport measure_change_check(double t, double y, MeasureChangeF f,
                                    double nu, const McConfig& config);

struct SupermartingaleResult {
  std::vector<double> times;
  std::vector<IdentityReport> reports;  // per time
  bool decreasing = false;              // LHS sample means strictly decrease
};

// E[exp(M_t / (1/y + A_t/2))] against e^y Pr{A_t <= 2/y} for each time,
// plus the strict-decrease check of the left side.
SupermartingaleResult supermartingale_check(double y,
                                            std::span<const double> times,
                                            const McConfig& config);

struct LowerTailPoint {
  double a = 0.0;
  double probability = 0.0;  // empirical Pr{A_t^{(1/2)} <= a}
  double prob_stderr = 0.0;
  double value = 0.0;  // (e^{2/a}/a) * probability
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool censored = false;  // no hits below a; value is unresolvable, not zero
};

// (e^{2/a}/a) Pr{A_t^{(1/2)} <= a} over a decreasing grid, one shared batch.
std::vector<LowerTailPoint> lower_tail_probe(double t,
                                             std::span<const double> a_grid,
                                             const McConfig& config);

namespace detail {
// Internal: cdf_direct with an explicit substream (other estimators embed
// direct-CDF batches that must not collide with the public one).
EstimateWithCI cdf_direct_sub(double t, double a, double nu,
                              const McConfig& config, std::uint64_t substream);
NormalStream normals_for(const McConfig& config, std::uint64_t substream,
                         std::uint64_t path_index);

// A heavy-tailed estimate next to its capped companion min(sample, cap),
// evaluated on the same paths. The capped mean is a lower bound of the full
// expectation with a bounded integrand, so its stderr supports a valid
// one-sided test even when the full-side stderr does not.
struct CappedEstimates {
  EstimateWithCI full;
  EstimateWithCI capped;
};

// cdf_identity(_drift) with a companion capped at cap_scaled (applied to the
// scaled integrand, i.e. the quantity whose mean estimates the probability).
CappedEstimates cdf_identity_capped(double t, double a, double nu,
                                    const McConfig& config, double cap_scaled);

// Supermartingale left side exp(M/(1/y + A/2)) with companion min(Z, cap),
// at the same substream slot as supermartingale_check uses for time index i.
CappedEstimates super_lhs_capped(double t, double y, std::size_t time_index,
                                 const McConfig& config, double cap);

// e^y Pr{A_t <= 2/y}, on the substream supermartingale_check uses for its
// right side at time index i.
EstimateWithCI super_rhs(double t, double y, std::size_t time_index,
                         const McConfig& config);
}  // namespace detail

}  // namespace gbm
