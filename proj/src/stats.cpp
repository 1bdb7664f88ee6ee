#include "gbm/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace gbm {

double Accumulator::stderr_of_mean() const {
  if (n < 2) return 0.0;
  return std::sqrt(variance() / static_cast<double>(n));
}

const char* to_string(IdentityId id) {
  switch (id) {
    case IdentityId::CdfNoDrift: return "cdf";
    case IdentityId::CdfDrift: return "cdf_drift";
    case IdentityId::Density: return "density";
    case IdentityId::MeasureChange: return "measure_change";
    case IdentityId::Supermartingale: return "supermartingale";
    case IdentityId::Yor: return "yor";
    case IdentityId::AsianPrice: return "price";
  }
  return "unknown";
}

IdentityReport make_report(IdentityId id, const EstimateWithCI& lhs,
                           const EstimateWithCI& rhs, double threshold) {
  IdentityReport r;
  r.identity_id = id;
  r.lhs = lhs;
  r.rhs = rhs;
  r.threshold = threshold;
  const double denom = std::hypot(lhs.stderr_, rhs.stderr_);
  const double diff = lhs.mean - rhs.mean;
  if (denom == 0.0) {
    r.z_score = diff == 0.0 ? 0.0
                            : std::copysign(
                                  std::numeric_limits<double>::infinity(), diff);
  } else {
    r.z_score = diff / denom;
  }
  r.pass = std::abs(r.z_score) <= threshold;
  return r;
}

EstimateWithCI ColumnStats::estimate() const {
  EstimateWithCI e;
  e.mean = total.mean;
  e.stderr_ = total.stderr_of_mean();
  e.n_samples = total.n;
  e.max_sample = total.n > 0 ? total.max_sample : 0.0;
  if (block_means.empty()) {
    e.trimmed_mean = total.mean;
  } else {
    std::vector<double> sorted = block_means;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = sorted.size();
    e.trimmed_mean = (k % 2 == 1)
                         ? sorted[k / 2]
                         : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
  }
  return e;
}

namespace {

constexpr std::uint64_t kMaxChunk = 16384;

// Chunk edges: block boundaries (median-of-means), running-mean checkpoints,
// then a max-size subdivision. Everything is a function of n alone.
struct Layout {
  std::vector<std::uint64_t> edges;      // chunk boundaries, first 0, last n
  std::vector<std::size_t> block_of;     // chunk -> block index
  std::size_t n_blocks = 0;
};

Layout make_layout(std::uint64_t n, const std::vector<std::uint64_t>& checkpoints) {
  Layout layout;
  layout.n_blocks = static_cast<std::size_t>(
      std::min<std::uint64_t>(kTrimmedBlocks, n));
  std::vector<std::uint64_t> cuts;
  cuts.push_back(0);
  cuts.push_back(n);
  for (std::size_t b = 1; b < layout.n_blocks; ++b) {
    cuts.push_back(n * b / layout.n_blocks);
  }
  for (std::uint64_t c : checkpoints) {
    if (c > 0 && c < n) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  layout.edges.push_back(0);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const std::uint64_t lo = cuts[i];
    const std::uint64_t hi = cuts[i + 1];
    const std::uint64_t pieces = (hi - lo + kMaxChunk - 1) / kMaxChunk;
    for (std::uint64_t p = 1; p <= pieces; ++p) {
      layout.edges.push_back(lo + (hi - lo) * p / pieces);
    }
  }

  layout.block_of.resize(layout.edges.size() - 1);
  for (std::size_t c = 0; c + 1 < layout.edges.size(); ++c) {
    layout.block_of[c] = block_of_index(layout.edges[c], n, layout.n_blocks);
  }
  return layout;
}

Accumulator merge_range(const std::vector<Accumulator>& accs, std::size_t lo,
                        std::size_t hi) {
  if (hi <= lo) return Accumulator{};
  if (hi - lo == 1) return accs[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  Accumulator left = merge_range(accs, lo, mid);
  const Accumulator right = merge_range(accs, mid, hi);
  left.merge(right);
  return left;
}

}  // namespace

BatchStats run_batch(std::uint64_t n, unsigned threads, std::size_t n_columns,
                     PathEval eval, void* ctx, bool want_checkpoints) {
  if (n == 0) throw std::invalid_argument("run_batch: n must be >= 1");
  if (n_columns == 0) throw std::invalid_argument("run_batch: no columns");

  std::vector<std::uint64_t> checkpoints;
  if (want_checkpoints) {
    for (int k = 16; k <= 20; ++k) {
      const std::uint64_t c = 1ull << k;
      if (c <= n) checkpoints.push_back(c);
    }
  }
  const Layout layout = make_layout(n, checkpoints);
  const std::size_t n_chunks = layout.edges.size() - 1;

  // chunk-major storage: accs[chunk * n_columns + col]
  std::vector<Accumulator> accs(n_chunks * n_columns);

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  unsigned n_threads = threads == 0 ? hw : threads;
  n_threads = static_cast<unsigned>(
      std::min<std::size_t>(n_threads, n_chunks));

  std::atomic<std::size_t> next_chunk{0};
  auto worker = [&]() {
    std::vector<double> out(n_columns);
    for (;;) {
      const std::size_t c = next_chunk.fetch_add(1);
      if (c >= n_chunks) break;
      Accumulator* chunk_accs = accs.data() + c * n_columns;
      for (std::uint64_t i = layout.edges[c]; i < layout.edges[c + 1]; ++i) {
        eval(i, out.data(), ctx);
        for (std::size_t col = 0; col < n_columns; ++col) {
          chunk_accs[col].add(out[col]);
        }
      }
    }
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  BatchStats stats;
  stats.columns.resize(n_columns);
  std::vector<Accumulator> scratch;
  for (std::size_t col = 0; col < n_columns; ++col) {
    ColumnStats& cs = stats.columns[col];
    std::vector<Accumulator> block_accs;
    block_accs.reserve(layout.n_blocks);
    for (std::size_t b = 0; b < layout.n_blocks; ++b) {
      scratch.clear();
      for (std::size_t c = 0; c < n_chunks; ++c) {
        if (layout.block_of[c] == b) scratch.push_back(accs[c * n_columns + col]);
      }
      block_accs.push_back(merge_range(scratch, 0, scratch.size()));
    }
    cs.total = merge_range(block_accs, 0, block_accs.size());
    cs.block_means.reserve(block_accs.size());
    for (const auto& a : block_accs) cs.block_means.push_back(a.mean);
  }

  if (want_checkpoints && !checkpoints.empty()) {
    Accumulator prefix;
    std::size_t next_cp = 0;
    for (std::size_t c = 0; c < n_chunks && next_cp < checkpoints.size(); ++c) {
      prefix.merge(accs[c * n_columns + 0]);
      while (next_cp < checkpoints.size() && prefix.n == checkpoints[next_cp]) {
        stats.checkpoint_ns.push_back(prefix.n);
        stats.checkpoint_means.push_back(prefix.mean);
        ++next_cp;
      }
    }
  }
  return stats;
}

}  // namespace gbm
