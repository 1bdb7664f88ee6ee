#pragma once

#include <cstdint>
#include <limits>
#include <type_traits>
#include <string>
#include <vector>

namespace gbm {

// Streaming mean/variance/max in Welford form. merge() uses the parallel
// combine rule, so partial accumulators can be reduced in any fixed order.
struct Accumulator {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double max_sample = -std::numeric_limits<double>::infinity();

  void add(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
    if (x > max_sample) max_sample = x;
  }

  void merge(const Accumulator& other) {
    if (other.n == 0) return;
    if (n == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(other.n);
    const double delta = other.mean - mean;
    const double total = na + nb;
    mean += delta * (nb / total);
    m2 += other.m2 + delta * delta * (na * nb / total);
    n += other.n;
    if (other.max_sample > max_sample) max_sample = other.max_sample;
  }

  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stderr_of_mean() const;
};

// Monte Carlo point estimate with its uncertainty and heavy-tail diagnostics.
// trimmed_mean is the median of block means over blocks fixed by path index.
struct EstimateWithCI {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::uint64_t n_samples = 0;
  double max_sample = 0.0;
  double trimmed_mean = 0.0;

  // y = scale * x + offset applied to every sample.
  EstimateWithCI affine(double scale, double offset = 0.0) const {
    EstimateWithCI out = *this;
    out.mean = scale * mean + offset;
    out.stderr_ = std::abs(scale) * stderr_;
    out.max_sample = scale * max_sample + offset;
    out.trimmed_mean = scale * trimmed_mean + offset;
    return out;
  }
};

enum class IdentityId {
  CdfNoDrift,
  CdfDrift,
  Density,
  MeasureChange,
  Supermartingale,
  Yor,
  AsianPrice,
};
const char* to_string(IdentityId id);

// Two independent estimates of the same quantity plus a z-score verdict.
struct IdentityReport {
  IdentityId identity_id{};
  EstimateWithCI lhs;
  EstimateWithCI rhs;
  double z_score = 0.0;
  double threshold = 3.0;
  bool pass = false;
};

IdentityReport make_report(IdentityId id, const EstimateWithCI& lhs,
                           const EstimateWithCI& rhs, double threshold = 3.0);

// Per-column result of a batch run: overall accumulator plus the fixed-block
// means backing the median-of-means estimate.
struct ColumnStats {
  Accumulator total;
  std::vector<double> block_means;

  EstimateWithCI estimate() const;
};

struct BatchStats {
  std::vector<ColumnStats> columns;
  // Running means of column 0 at path counts 2^16..2^20 (clipped to n).
  std::vector<std::uint64_t> checkpoint_ns;
  std::vector<double> checkpoint_means;
};

// Parallel map over path indices [0, n) with a deterministic reduction.
// eval(i, out) writes n_columns values for path i. Chunk and block boundaries
// depend only on n, so the result is bit-identical for any thread count.
using PathEval = void (*)(std::uint64_t, double*, void*);
BatchStats run_batch(std::uint64_t n, unsigned threads, std::size_t n_columns,
                     PathEval eval, void* ctx, bool want_checkpoints = false);

template <typename F>
BatchStats run_batch(std::uint64_t n, unsigned threads, std::size_t n_columns,
                     F&& f, bool want_checkpoints = false) {
  using Fn = std::remove_reference_t<F>;
  auto thunk = [](std::uint64_t i, double* out, void* ctx) {
    (*static_cast<Fn*>(ctx))(i, out);
  };
  return run_batch(n, threads, n_columns, static_cast<PathEval>(thunk),
                   const_cast<void*>(static_cast<const void*>(&f)),
                   want_checkpoints);
}

inline constexpr std::size_t kTrimmedBlocks = 32;

// Median-of-means block b covers path indices [n*b/k, n*(b+1)/k).
inline std::size_t block_of_index(std::uint64_t i, std::uint64_t n,
                                  std::size_t k) {
  std::size_t b = static_cast<std::size_t>(
      (static_cast<unsigned __int128>(i) * k) / n);
  if (b >= k) b = k - 1;
  while (b + 1 < k && n * (b + 1) / k <= i) ++b;
  while (b > 0 && n * b / k > i) --b;
  return b;
}

}  // namespace gbm
