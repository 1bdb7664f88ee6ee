#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gbm/rng.hpp"

namespace gbm {

enum class Scheme { LeftRiemann, Trapezoid };
const char* to_string(Scheme s);

// One simulation stream: horizon t, grid size n, drift nu, root seed.
// The integrand is exp(B_s + nu*s - s/2); nu = 0 gives the base integral.
struct PathConfig {
  double horizon = 1.0;
  std::int64_t steps = 2048;
  double drift = 0.0;
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::Trapezoid;
};

// Throws std::invalid_argument on horizon < 0, steps < 1, or non-finite
// fields. horizon == 0 is the degenerate empty integral.
void validate(const PathConfig& config);

// Terminal functionals of one path.
//   terminal_log  B_t
//   martingale    M_t = exp(B_t - t/2)
//   integral      A_t^{(nu)} under the configured quadrature
//   ratio         integral / martingale (equals A_t/M_t when nu = 0)
//   girsanov_state  R_t = -M_t / (1/y - A_t/2); NaN unless y was supplied
//                   and the path never reached A >= 2/y
//   blown         running integral reached 2/y (only meaningful given y)
struct PathSample {
  double terminal_log = 0.0;
  double martingale = 1.0;
  double integral = 0.0;
  double ratio = 0.0;
  double girsanov_state = 0.0;
  bool blown = false;
};

PathSample simulate_path(const PathConfig& config,
                         std::optional<double> y = std::nullopt,
                         std::uint64_t path_index = 0);

// Same computation on caller-supplied Brownian increments (each N(0, dt)).
// This is the deterministic core behind simulate_path; tests use it to force
// increments, and bridge refinement feeds it refined increment vectors.
PathSample simulate_from_increments(const PathConfig& config,
                                    std::span<const double> increments,
                                    std::optional<double> y = std::nullopt);

// Terminal state of the generic integral int_0^t exp(coef_b*B_s + coef_s*s) ds.
struct ExpIntegral {
  double terminal_log = 0.0;  // B_t
  double integral = 0.0;
};

ExpIntegral integrate_exp(double coef_b, double coef_s, double horizon,
                          std::int64_t steps, Scheme scheme, NormalStream& normals);

// Both integrals of the density sandwich on shared increments:
//   lower = int exp(B_s - s/2) ds,  upper = int exp(B_s + s/2) ds.
struct DensityPairSample {
  double lower = 0.0;
  double upper = 0.0;
  double ratio = 0.0;  // lower / M_t
};

DensityPairSample simulate_density_pair(const PathConfig& config,
                                        std::uint64_t path_index);
DensityPairSample simulate_density_pair(double horizon, std::int64_t steps,
                                        Scheme scheme, NormalStream& normals);

// Draw the n increments of a path as a vector (variance dt each).
std::vector<double> draw_increments(double horizon, std::int64_t steps,
                                    NormalStream& normals);

// Brownian-bridge midpoint insertion: 2n increments at step dt/2 whose
// pairwise sums reproduce the coarse increments exactly.
std::vector<double> bridge_refine(std::span<const double> increments, double dt,
                                  NormalStream& normals);

// |R_t - (-y + sum R dB - 1/2 sum R^2 dt)| along one increment vector,
// with R evaluated from the closed form at every grid point.
// Returns NaN if the running integral reaches 2/y (R undefined beyond).
double girsanov_residual(const PathConfig& config,
                         std::span<const double> increments, double y);

}  // namespace gbm
