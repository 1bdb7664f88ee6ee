#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbm/stats.hpp"

namespace gbm {

// One flat output row. The CSV column order is fixed:
//   id,t,a,nu,n,estimate,stderr,trimmed,max_sample,z,pass
// Absent fields serialize as empty CSV cells and are omitted from JSON.
struct Record {
  std::string id;
  std::optional<double> t;
  std::optional<double> a;
  std::optional<double> nu;
  std::uint64_t n = 0;
  std::optional<double> estimate;
  std::optional<double> stderr_;
  std::optional<double> trimmed;
  std::optional<double> max_sample;
  std::optional<double> z;
  std::optional<bool> pass;
};

// 17 significant digits, locale-independent.
std::string format_double(double v);

std::string to_csv(std::span<const Record> records);
nlohmann::json to_json(std::span<const Record> records);

Record make_record(std::string id, std::optional<double> t,
                   std::optional<double> a, std::optional<double> nu,
                   const EstimateWithCI& e);

// Two rows sharing the report's z and verdict.
std::vector<Record> report_records(const IdentityReport& report,
                                   std::string lhs_id, std::string rhs_id,
                                   std::optional<double> t,
                                   std::optional<double> a,
                                   std::optional<double> nu);

nlohmann::json estimate_json(const EstimateWithCI& e);
nlohmann::json report_json(const IdentityReport& report);

}  // namespace gbm
