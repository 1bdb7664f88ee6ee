#pragma once

#include "gbm/estimators.hpp"

namespace gbm {

// Asian call on the time integral of exp(volatility*B_s + drift*s),
// payoff (integral - strike)^+ at the horizon. Prices are plain
// expectations; no discounting.
struct OptionSpec {
  double strike = 1.0;
  double horizon = 1.0;
  double drift = -0.5;
  double volatility = 1.0;
};
void validate(const OptionSpec& spec);

// Time change s = sigma^2 s' reduces any spec to unit volatility:
//   t' = sigma^2 t, drift' = drift / sigma^2, strike' = sigma^2 * strike,
// and the caller maps the canonical price back with the returned scale
// (price of the original = scale * canonical price, scale = 1/sigma^2).
struct CanonicalOption {
  OptionSpec spec;
  double scale = 1.0;
};
CanonicalOption canonicalize(const OptionSpec& spec);

// True when the canonical drift is the base case -1/2, i.e. the integrand
// reduces to exp(B - s/2); the identity route exists only there.
bool identity_route_available(const OptionSpec& spec);

// Sample mean of the payoff; any drift.
EstimateWithCI price_direct(const OptionSpec& spec, const McConfig& config);

// t - a + a^2 E[(a+A_t)^{-1} exp(2 M_t/(a+A_t) - 2/a)] on the canonical
// spec, mapped back through the volatility scale. Requires the base drift.
EstimateWithCI price_identity(const OptionSpec& spec, const McConfig& config);

IdentityReport price_check(const OptionSpec& spec, const McConfig& config);

namespace detail {
// price_identity with a companion whose expectation factor is capped at
// cap_v before the affine map; the companion is a lower bound of the price
// with a bounded integrand.
CappedEstimates price_identity_capped(const OptionSpec& spec,
                                      const McConfig& config, double cap_v);
}  // namespace detail

}  // namespace gbm
