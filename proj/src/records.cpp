#include "gbm/records.hpp"

#include <cstdio>

namespace gbm {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void append_field(std::string& out, const std::optional<double>& v) {
  out.push_back(',');
  if (v) out += format_double(*v);
}

}  // namespace

std::string to_csv(std::span<const Record> records) {
  std::string out = "id,t,a,nu,n,estimate,stderr,trimmed,max_sample,z,pass\n";
  for (const Record& r : records) {
    out += r.id;
    append_field(out, r.t);
    append_field(out, r.a);
    append_field(out, r.nu);
    out.push_back(',');
    out += std::to_string(r.n);
    append_field(out, r.estimate);
    append_field(out, r.stderr_);
    append_field(out, r.trimmed);
    append_field(out, r.max_sample);
    append_field(out, r.z);
    out.push_back(',');
    if (r.pass) out += *r.pass ? "true" : "false";
    out.push_back('\n');
  }
  return out;
}

nlohmann::json to_json(std::span<const Record> records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Record& r : records) {
    nlohmann::json obj;
    obj["id"] = r.id;
    if (r.t) obj["t"] = *r.t;
    if (r.a) obj["a"] = *r.a;
    if (r.nu) obj["nu"] = *r.nu;
    obj["n"] = r.n;
    if (r.estimate) obj["estimate"] = *r.estimate;
    if (r.stderr_) obj["stderr"] = *r.stderr_;
    if (r.trimmed) obj["trimmed"] = *r.trimmed;
    if (r.max_sample) obj["max_sample"] = *r.max_sample;
    if (r.z) obj["z"] = *r.z;
    if (r.pass) obj["pass"] = *r.pass;
    arr.push_back(std::move(obj));
  }
  return arr;
}

Record make_record(std::string id, std::optional<double> t,
                   std::optional<double> a, std::optional<double> nu,
                   const EstimateWithCI& e) {
  Record r;
  r.id = std::move(id);
  r.t = t;
  r.a = a;
  r.nu = nu;
  r.n = e.n_samples;
  r.estimate = e.mean;
  r.stderr_ = e.stderr_;
  r.trimmed = e.trimmed_mean;
  r.max_sample = e.max_sample;
  return r;
}

std::vector<Record> report_records(const IdentityReport& report,
                                   std::string lhs_id, std::string rhs_id,
                                   std::optional<double> t,
                                   std::optional<double> a,
                                   std::optional<double> nu) {
  Record lhs = make_record(std::move(lhs_id), t, a, nu, report.lhs);
  Record rhs = make_record(std::move(rhs_id), t, a, nu, report.rhs);
  lhs.z = report.z_score;
  lhs.pass = report.pass;
  rhs.z = report.z_score;
  rhs.pass = report.pass;
  return {std::move(lhs), std::move(rhs)};
}

nlohmann::json estimate_json(const EstimateWithCI& e) {
  return nlohmann::json{{"mean", e.mean},
                        {"stderr", e.stderr_},
                        {"n", e.n_samples},
                        {"max_sample", e.max_sample},
                        {"trimmed_mean", e.trimmed_mean}};
}

nlohmann::json report_json(const IdentityReport& report) {
  return nlohmann::json{{"identity", to_string(report.identity_id)},
                        {"lhs", estimate_json(report.lhs)},
                        {"rhs", estimate_json(report.rhs)},
                        {"z", report.z_score},
                        {"threshold", report.threshold},
                        {"pass", report.pass}};
}

}  // namespace gbm
