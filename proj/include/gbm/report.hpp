#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gbm/records.hpp"

namespace gbm {

// Full verification grid. n and steps are the published defaults; lowering
// them gives a smoke run with the same pass thresholds.
struct AcceptanceOptions {
  std::uint64_t n = 1'000'000;
  std::int64_t steps = 2048;
  std::uint64_t seed = 7;
  unsigned threads = 0;
};

struct CriterionResult {
  int criterion = 0;
  std::string name;
  bool pass = false;
  bool asserted = true;  // false: reported only, never gates
  std::string detail;
  std::vector<Record> records;
};

using CriterionCallback = std::function<void(const CriterionResult&)>;

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options,
                                            const CriterionCallback& on_result = {});

bool all_asserted_pass(const std::vector<CriterionResult>& results);

}  // namespace gbm
