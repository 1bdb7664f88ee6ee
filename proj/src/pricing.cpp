#include "gbm/pricing.hpp"

#include <cmath>
#include <stdexcept>

namespace gbm {

namespace {

constexpr std::uint64_t kSubPriceDirect = 9ull << 8;
constexpr std::uint64_t kSubPriceIdentity = 10ull << 8;

bool canonical_base_drift(const OptionSpec& canonical) {
  return std::abs(canonical.drift + 0.5) <= 1e-12;
}

}  // namespace

void validate(const OptionSpec& spec) {
  if (!(std::isfinite(spec.strike) && spec.strike > 0.0)) {
    throw std::invalid_argument("OptionSpec: strike must be > 0");
  }
  if (!(std::isfinite(spec.horizon) && spec.horizon > 0.0)) {
    throw std::invalid_argument("OptionSpec: horizon must be > 0");
  }
  if (!(std::isfinite(spec.volatility) && spec.volatility > 0.0)) {
    throw std::invalid_argument("OptionSpec: volatility must be > 0");
  }
  if (!std::isfinite(spec.drift)) {
    throw std::invalid_argument("OptionSpec: drift must be finite");
  }
}

CanonicalOption canonicalize(const OptionSpec& spec) {
  validate(spec);
  if (spec.volatility == 1.0) return CanonicalOption{spec, 1.0};
  const double s2 = spec.volatility * spec.volatility;
  CanonicalOption out;
  out.spec.strike = s2 * spec.strike;
  out.spec.horizon = s2 * spec.horizon;
  out.spec.drift = spec.drift / s2;
  out.spec.volatility = 1.0;
  out.scale = 1.0 / s2;
  return out;
}

bool identity_route_available(const OptionSpec& spec) {
  return canonical_base_drift(canonicalize(spec).spec);
}

EstimateWithCI price_direct(const OptionSpec& spec, const McConfig& config) {
  validate(spec);
  validate(config);
  const auto canon = canonicalize(spec);
  const double t = canon.spec.horizon;
  const double a = canon.spec.strike;
  const double coef_s = canon.spec.drift;  // exponent coefficient of s
  const auto key =
      StreamKey::derive(config.seed, config.stream, kSubPriceDirect);
  auto eval = [&](std::uint64_t i, double* out) {
    NormalStream normals(key.path_engine(i), config.zero_increments);
    const auto f =
        integrate_exp(1.0, coef_s, t, config.steps, config.scheme, normals);
    out[0] = std::max(f.integral - a, 0.0);
  };
  const auto stats = run_batch(config.n_samples, config.threads, 1, eval);
  return stats.columns[0].estimate().affine(canon.scale);
}

namespace {

detail::CappedEstimates price_identity_core(const OptionSpec& spec,
                                            const McConfig& config,
                                            const double* cap_v) {
  const auto canon = canonicalize(spec);
  if (!canonical_base_drift(canon.spec)) {
    throw std::invalid_argument(
        "price_identity: requires canonical drift -1/2 (drift == -volatility^2/2)");
  }
  const double t = canon.spec.horizon;
  const double a = canon.spec.strike;
  const auto key =
      StreamKey::derive(config.seed, config.stream, kSubPriceIdentity);
  const std::size_t cols = cap_v ? 2 : 1;
  auto eval = [&](std::uint64_t i, double* out) {
    NormalStream normals(key.path_engine(i), config.zero_increments);
    const auto f =
        integrate_exp(1.0, -0.5, t, config.steps, config.scheme, normals);
    const double m = std::exp(f.terminal_log - 0.5 * t);
    const double denom = a + f.integral;
    const double v = std::exp(2.0 * m / denom - 2.0 / a) / denom;
    out[0] = v;
    if (cols == 2) out[1] = std::min(v, *cap_v);
  };
  const auto stats = run_batch(config.n_samples, config.threads, cols, eval);
  detail::CappedEstimates result;
  result.full = stats.columns[0].estimate().affine(canon.scale * a * a,
                                                   canon.scale * (t - a));
  if (cols == 2) {
    result.capped = stats.columns[1].estimate().affine(canon.scale * a * a,
                                                       canon.scale * (t - a));
  }
  return result;
}

}  // namespace

EstimateWithCI price_identity(const OptionSpec& spec, const McConfig& config) {
  validate(spec);
  validate(config);
  return price_identity_core(spec, config, nullptr).full;
}

namespace detail {

CappedEstimates price_identity_capped(const OptionSpec& spec,
                                      const McConfig& config, double cap_v) {
  validate(spec);
  validate(config);
  if (!(cap_v > 0.0)) throw std::invalid_argument("cap must be > 0");
  return price_identity_core(spec, config, &cap_v);
}

}  // namespace detail

IdentityReport price_check(const OptionSpec& spec, const McConfig& config) {
  const auto direct = price_direct(spec, config);
  const auto identity = price_identity(spec, config);
  return make_report(IdentityId::AsianPrice, direct, identity);
}

}  // namespace gbm
