#include "gbm/paths.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gbm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Quadrature state for int exp(coef_b*B_s + coef_s*s) ds, advanced one grid
// step at a time. Brownian values at the grid are exact; only the time
// integral is approximated.
struct Quad {
  double coef_b;
  double coef_s;
  double dt;
  Scheme scheme;
  double sum = 0.0;
  double f_prev = 1.0;  // integrand at the previous grid point; exp(0) at s=0

  void step(double b, double s) {
    const double f = std::exp(coef_b * b + coef_s * s);
    sum += scheme == Scheme::Trapezoid ? 0.5 * dt * (f_prev + f) : dt * f_prev;
    f_prev = f;
  }
};

template <typename IncrementAt>
PathSample run_path(const PathConfig& config, std::optional<double> y,
                    IncrementAt&& increment_at) {
  const double t = config.horizon;
  PathSample out;
  if (y) {
    if (!(*y > 0.0)) throw std::invalid_argument("simulate_path: y must be > 0");
    out.girsanov_state = -*y;  // R_0
  } else {
    out.girsanov_state = kNaN;
  }
  if (t == 0.0) {
    return out;  // B_0 = 0, M_0 = 1, empty integral
  }

  const double dt = t / static_cast<double>(config.steps);
  const double blow_at = y ? 2.0 / *y : 0.0;
  Quad quad{1.0, config.drift - 0.5, dt, config.scheme};
  double b = 0.0;
  for (std::int64_t k = 1; k <= config.steps; ++k) {
    b += increment_at(k - 1);
    quad.step(b, dt * static_cast<double>(k));
    if (y && !out.blown && quad.sum >= blow_at) out.blown = true;
  }

  out.terminal_log = b;
  out.martingale = std::exp(b - 0.5 * t);
  out.integral = quad.sum;
  out.ratio = out.integral / out.martingale;
  if (y) {
    out.girsanov_state =
        out.blown ? kNaN : -out.martingale / (1.0 / *y - 0.5 * out.integral);
  }
  return out;
}

}  // namespace

const char* to_string(Scheme s) {
  return s == Scheme::Trapezoid ? "trapezoid" : "left_riemann";
}

void validate(const PathConfig& config) {
  if (!std::isfinite(config.horizon) || config.horizon < 0.0) {
    throw std::invalid_argument("PathConfig: horizon must be finite and >= 0");
  }
  if (config.steps < 1) {
    throw std::invalid_argument("PathConfig: steps must be >= 1");
  }
  if (!std::isfinite(config.drift)) {
    throw std::invalid_argument("PathConfig: drift must be finite");
  }
}

PathSample simulate_path(const PathConfig& config, std::optional<double> y,
                         std::uint64_t path_index) {
  validate(config);
  const auto key = StreamKey::derive(config.seed, 0, 0);
  NormalStream normals(key.path_engine(path_index));
  const double sqdt =
      std::sqrt(config.horizon / static_cast<double>(config.steps));
  return run_path(config, y,
                  [&](std::int64_t) { return sqdt * normals.next(); });
}

PathSample simulate_from_increments(const PathConfig& config,
                                    std::span<const double> increments,
                                    std::optional<double> y) {
  validate(config);
  if (config.horizon > 0.0 &&
      increments.size() != static_cast<std::size_t>(config.steps)) {
    throw std::invalid_argument(
        "simulate_from_increments: increment count must equal steps");
  }
  return run_path(config, y,
                  [&](std::int64_t k) { return increments[static_cast<std::size_t>(k)]; });
}

ExpIntegral integrate_exp(double coef_b, double coef_s, double horizon,
                          std::int64_t steps, Scheme scheme,
                          NormalStream& normals) {
  ExpIntegral out;
  if (horizon == 0.0) return out;
  const double dt = horizon / static_cast<double>(steps);
  const double sqdt = std::sqrt(dt);
  Quad quad{coef_b, coef_s, dt, scheme};
  double b = 0.0;
  for (std::int64_t k = 1; k <= steps; ++k) {
    b += sqdt * normals.next();
    quad.step(b, dt * static_cast<double>(k));
  }
  out.terminal_log = b;
  out.integral = quad.sum;
  return out;
}

DensityPairSample simulate_density_pair(const PathConfig& config,
                                        std::uint64_t path_index) {
  validate(config);
  const auto key = StreamKey::derive(config.seed, 0, 0);
  NormalStream normals(key.path_engine(path_index));
  return simulate_density_pair(config.horizon, config.steps, config.scheme,
                               normals);
}

DensityPairSample simulate_density_pair(double horizon, std::int64_t steps,
                                        Scheme scheme, NormalStream& normals) {
  DensityPairSample out;
  if (horizon == 0.0) return out;
  const double dt = horizon / static_cast<double>(steps);
  const double sqdt = std::sqrt(dt);
  Quad low{1.0, -0.5, dt, scheme};
  Quad up{1.0, +0.5, dt, scheme};
  double b = 0.0;
  for (std::int64_t k = 1; k <= steps; ++k) {
    b += sqdt * normals.next();
    const double s = dt * static_cast<double>(k);
    low.step(b, s);
    up.step(b, s);
  }
  out.lower = low.sum;
  out.upper = up.sum;
  out.ratio = out.lower / std::exp(b - 0.5 * horizon);
  return out;
}

std::vector<double> draw_increments(double horizon, std::int64_t steps,
                                    NormalStream& normals) {
  const double sqdt = std::sqrt(horizon / static_cast<double>(steps));
  std::vector<double> out(static_cast<std::size_t>(steps));
  for (auto& d : out) d = sqdt * normals.next();
  return out;
}

std::vector<double> bridge_refine(std::span<const double> increments, double dt,
                                  NormalStream& normals) {
  std::vector<double> out;
  out.reserve(2 * increments.size());
  const double half_sd = 0.5 * std::sqrt(dt);
  for (double d : increments) {
    // midpoint displacement N(d/2, dt/4) conditional on the step total
    const double xi = half_sd * normals.next();
    out.push_back(0.5 * d + xi);
    out.push_back(0.5 * d - xi);
  }
  return out;
}

double girsanov_residual(const PathConfig& config,
                         std::span<const double> increments, double y) {
  validate(config);
  if (!(y > 0.0)) throw std::invalid_argument("girsanov_residual: y must be > 0");
  if (config.drift != 0.0) {
    throw std::invalid_argument("girsanov_residual: requires drift 0");
  }
  if (increments.size() != static_cast<std::size_t>(config.steps)) {
    throw std::invalid_argument("girsanov_residual: increment count mismatch");
  }
  const double t = config.horizon;
  const double dt = t / static_cast<double>(config.steps);
  const double blow_at = 2.0 / y;

  Quad quad{1.0, config.drift - 0.5, dt, config.scheme};
  double b = 0.0;
  double r_prev = -y;  // R at s = 0
  double ito_sum = 0.0;
  double drift_sum = 0.0;
  for (std::int64_t k = 1; k <= config.steps; ++k) {
    const double db = increments[static_cast<std::size_t>(k - 1)];
    ito_sum += r_prev * db;
    drift_sum += r_prev * r_prev * dt;
    b += db;
    const double s = dt * static_cast<double>(k);
    quad.step(b, s);
    if (quad.sum >= blow_at) return kNaN;
    r_prev = -std::exp(b - 0.5 * s) / (1.0 / y - 0.5 * quad.sum);
  }
  const double r_terminal = r_prev;
  return std::abs(r_terminal - (-y + ito_sum - 0.5 * drift_sum));
}

}  // namespace gbm
