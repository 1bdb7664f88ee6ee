#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gbm/estimators.hpp"
#include "gbm/oracles.hpp"
#include "gbm/paths.hpp"
#include "gbm/pricing.hpp"
#include "gbm/records.hpp"
#include "gbm/report.hpp"

namespace {

using gbm::McConfig;
using gbm::Record;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitVerificationFailed = 3;

struct CommonOpts {
  McConfig mc;
  std::string format = "csv";
  std::string output;
  bool timestamps = false;
};

// Flat key=value config support. The file mirrors the subcommand's flags;
// values only fill in flags absent from the command line, so explicit flags
// always override the file. Expanded before CLI11 sees the argument list.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args;
  std::string config_path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config") {
      if (i + 1 >= argc) {
        throw std::invalid_argument("--config requires a file path");
      }
      config_path = argv[++i];
      continue;
    }
    if (arg.rfind("--config=", 0) == 0) {
      config_path = arg.substr(9);
      continue;
    }
    args.push_back(arg);
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) {
    throw std::invalid_argument("cannot open config file: " + config_path);
  }
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    const auto last = s.find_last_not_of(" \t\r");
    return first == std::string::npos ? std::string()
                                      : s.substr(first, last - first + 1);
  };
  std::string line;
  while (std::getline(in, line)) {
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line is not key=value: " + stripped);
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line has empty key: " + stripped);
    }
    const std::string flag = "--" + key;
    bool present = false;
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) {
        present = true;
        break;
      }
    }
    if (!present) {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

void add_common(CLI::App* cmd, CommonOpts& opts, std::uint64_t default_n) {
  opts.mc.n_samples = default_n;
  cmd->add_option("--config", "flat key=value file mirroring this "
                              "subcommand's flags; flags override the file");
  cmd->add_option("--n", opts.mc.n_samples, "Monte Carlo sample count")
      ->capture_default_str();
  cmd->add_option("--steps", opts.mc.steps, "time grid steps")
      ->capture_default_str();
  cmd->add_option("--seed", opts.mc.seed, "root seed")
      ->envname("GBM_SEED")
      ->capture_default_str();
  cmd->add_option("--stream", opts.mc.stream, "stream id for substream derivation")
      ->capture_default_str();
  cmd->add_option("--threads", opts.mc.threads, "worker threads (0 = auto)")
      ->capture_default_str();
  std::map<std::string, gbm::Scheme> schemes{
      {"trapezoid", gbm::Scheme::Trapezoid},
      {"left_riemann", gbm::Scheme::LeftRiemann}};
  cmd->add_option("--scheme", opts.mc.scheme, "quadrature scheme")
      ->transform(CLI::CheckedTransformer(schemes, CLI::ignore_case))
      ->default_str("trapezoid");
  cmd->add_option("--format", opts.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  cmd->add_option("--output", opts.output, "output path (default stdout)");
  cmd->add_flag("--timestamps", opts.timestamps,
                "log start/end times to stderr");
}

void write_output(const CommonOpts& opts, const std::string& text) {
  if (opts.output.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream out(opts.output, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + opts.output);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void emit_records(const CommonOpts& opts, const std::vector<Record>& records,
                  const json& structured) {
  if (opts.format == "csv") {
    write_output(opts, gbm::to_csv(records));
  } else {
    write_output(opts, structured.dump(2) + "\n");
  }
}

void log_timestamp(const CommonOpts& opts, const char* phase) {
  if (!opts.timestamps) return;
  const std::time_t now = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&now));
  std::fprintf(stderr, "[%s] %s\n", buf, phase);
}

json params_json(const McConfig& mc) {
  return json{{"n", mc.n_samples},       {"steps", mc.steps},
              {"seed", mc.seed},         {"stream", mc.stream},
              {"scheme", to_string(mc.scheme)}, {"threads", mc.threads}};
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Monte Carlo toolkit for time integrals of geometric Brownian motion"};
  app.require_subcommand(1);

  int exit_code = kExitOk;

  // ---- simulate ----
  auto sim_opts = std::make_shared<CommonOpts>();
  auto sim_t = std::make_shared<double>(1.0);
  auto sim_nu = std::make_shared<double>(0.0);
  auto sim_y = std::make_shared<double>(0.0);
  auto* sim = app.add_subcommand("simulate", "emit terminal path functionals");
  add_common(sim, *sim_opts, 10);
  sim->add_option("--t", *sim_t, "horizon")->capture_default_str();
  sim->add_option("--nu", *sim_nu, "drift")->capture_default_str();
  sim->add_option("--y", *sim_y, "girsanov parameter y > 0 (0 = off)")
      ->capture_default_str();
  sim->callback([=]() {
    log_timestamp(*sim_opts, "simulate start");
    gbm::PathConfig config;
    config.horizon = *sim_t;
    config.steps = sim_opts->mc.steps;
    config.drift = *sim_nu;
    config.seed = sim_opts->mc.seed;
    config.scheme = sim_opts->mc.scheme;
    std::optional<double> y;
    if (*sim_y != 0.0) y = *sim_y;

    std::string csv = "path,terminal_log,martingale,integral,ratio,girsanov_state,blown\n";
    json arr = json::array();
    for (std::uint64_t i = 0; i < sim_opts->mc.n_samples; ++i) {
      const auto s = gbm::simulate_path(config, y, i);
      if (sim_opts->format == "csv") {
        csv += std::to_string(i) + ',' + gbm::format_double(s.terminal_log) +
               ',' + gbm::format_double(s.martingale) + ',' +
               gbm::format_double(s.integral) + ',' +
               gbm::format_double(s.ratio) + ',' +
               gbm::format_double(s.girsanov_state) + ',' +
               (s.blown ? "true" : "false") + '\n';
      } else {
        arr.push_back(json{{"path", i},
                           {"terminal_log", s.terminal_log},
                           {"martingale", s.martingale},
                           {"integral", s.integral},
                           {"ratio", s.ratio},
                           {"girsanov_state", s.girsanov_state},
                           {"blown", s.blown}});
      }
    }
    if (sim_opts->format == "csv") {
      write_output(*sim_opts, csv);
    } else {
      write_output(*sim_opts,
                   json{{"op", "simulate"}, {"params", params_json(sim_opts->mc)},
                        {"samples", arr}}
                           .dump(2) +
                       "\n");
    }
    log_timestamp(*sim_opts, "simulate done");
  });

  // ---- cdf ----
  auto cdf_opts = std::make_shared<CommonOpts>();
  auto cdf_t = std::make_shared<double>(1.0);
  auto cdf_a = std::make_shared<double>(1.0);
  auto cdf_nu = std::make_shared<double>(0.0);
  auto* cdf = app.add_subcommand("cdf", "distribution identity estimators");
  add_common(cdf, *cdf_opts, 1'000'000);
  cdf->add_option("--t", *cdf_t, "horizon")->capture_default_str();
  cdf->add_option("--a", *cdf_a, "level a > 0")->capture_default_str();
  cdf->add_option("--nu", *cdf_nu, "drift")->capture_default_str();
  cdf->callback([=, &exit_code]() {
    log_timestamp(*cdf_opts, "cdf start");
    const auto report = gbm::cdf_check(*cdf_t, *cdf_a, *cdf_nu, cdf_opts->mc);
    const char* rhs_id = *cdf_nu == 0.0 ? "cdf.identity" : "cdf.identity_drift";
    const auto records =
        gbm::report_records(report, "cdf.direct", rhs_id, *cdf_t, *cdf_a, *cdf_nu);
    emit_records(*cdf_opts, records,
                 json{{"op", "cdf"},
                      {"t", *cdf_t},
                      {"a", *cdf_a},
                      {"nu", *cdf_nu},
                      {"params", params_json(cdf_opts->mc)},
                      {"direct", gbm::estimate_json(report.lhs)},
                      {"identity", gbm::estimate_json(report.rhs)},
                      {"report", gbm::report_json(report)}});
    if (!report.pass) exit_code = kExitVerificationFailed;
    log_timestamp(*cdf_opts, "cdf done");
  });

  // ---- density ----
  auto den_opts = std::make_shared<CommonOpts>();
  auto den_t = std::make_shared<double>(1.0);
  auto den_a = std::make_shared<double>(1.0);
  auto den_grid = std::make_shared<std::vector<double>>();
  auto den_points = std::make_shared<unsigned>(256);
  auto* den = app.add_subcommand("density", "density estimators");
  add_common(den, *den_opts, 1'000'000);
  den->add_option("--t", *den_t, "horizon")->capture_default_str();
  den->add_option("--a", *den_a, "level a > 0")->capture_default_str();
  den->add_option("--grid", *den_grid,
                  "log grid bounds LO HI; evaluates the whole grid instead")
      ->expected(2);
  den->add_option("--grid-points", *den_points, "grid size")
      ->capture_default_str();
  den->callback([=, &exit_code]() {
    log_timestamp(*den_opts, "density start");
    if (!den_grid->empty()) {
      std::vector<double> grid(*den_points);
      const double lo = (*den_grid)[0];
      const double hi = (*den_grid)[1];
      for (std::size_t j = 0; j < grid.size(); ++j) {
        grid[j] = lo * std::pow(hi / lo, static_cast<double>(j) /
                                             static_cast<double>(grid.size() - 1));
      }
      const auto result = gbm::density_grid(*den_t, grid, den_opts->mc);
      std::vector<Record> records;
      for (const auto& pt : result.points) {
        records.push_back(gbm::make_record("density.event", *den_t, pt.a,
                                           std::nullopt, pt.event));
      }
      Record integral_row;
      integral_row.id = "density.integral";
      integral_row.t = *den_t;
      integral_row.n = den_opts->mc.n_samples;
      integral_row.estimate = result.integral;
      records.push_back(integral_row);
      json points = json::array();
      for (const auto& pt : result.points) {
        points.push_back(json{{"a", pt.a}, {"event", gbm::estimate_json(pt.event)}});
      }
      emit_records(*den_opts, records,
                   json{{"op", "density_grid"},
                        {"t", *den_t},
                        {"params", params_json(den_opts->mc)},
                        {"integral", result.integral},
                        {"points", points}});
    } else {
      const auto report = gbm::density_check(*den_t, *den_a, den_opts->mc);
      const auto records = gbm::report_records(report, "density.event",
                                               "density.difference", *den_t,
                                               *den_a, 0.0);
      emit_records(*den_opts, records,
                   json{{"op", "density"},
                        {"t", *den_t},
                        {"a", *den_a},
                        {"params", params_json(den_opts->mc)},
                        {"event", gbm::estimate_json(report.lhs)},
                        {"difference", gbm::estimate_json(report.rhs)},
                        {"report", gbm::report_json(report)}});
      if (!report.pass) exit_code = kExitVerificationFailed;
    }
    log_timestamp(*den_opts, "density done");
  });

  // ---- moment ----
  auto mom_opts = std::make_shared<CommonOpts>();
  auto mom_t = std::make_shared<double>(1.0);
  auto mom_theta = std::make_shared<double>(1.0);
  auto mom_variant = std::make_shared<gbm::MomentVariant>(gbm::MomentVariant::NoDrift);
  auto* mom = app.add_subcommand("moment", "exponential moment diagnostics");
  add_common(mom, *mom_opts, 1ull << 20);
  mom->add_option("--t", *mom_t, "horizon")->capture_default_str();
  mom->add_option("--theta", *mom_theta, "exponent coefficient")
      ->capture_default_str();
  std::map<std::string, gbm::MomentVariant> variants{
      {"no_drift", gbm::MomentVariant::NoDrift},
      {"half_drift", gbm::MomentVariant::HalfDrift},
      {"ratio_m_over_a", gbm::MomentVariant::RatioMoverA}};
  mom->add_option("--variant", *mom_variant, "exponent variant")
      ->transform(CLI::CheckedTransformer(variants, CLI::ignore_case))
      ->default_str("no_drift");
  mom->callback([=]() {
    log_timestamp(*mom_opts, "moment start");
    const auto diag =
        gbm::exp_moment(*mom_t, *mom_theta, *mom_variant, mom_opts->mc);
    std::vector<Record> records;
    Record main = gbm::make_record(std::string("moment.") + to_string(*mom_variant),
                                   *mom_t, *mom_theta, std::nullopt,
                                   diag.estimate);
    records.push_back(main);
    for (std::size_t k = 0; k < diag.running_ns.size(); ++k) {
      Record row;
      row.id = "moment.running_mean";
      row.t = *mom_t;
      row.a = *mom_theta;
      row.n = diag.running_ns[k];
      row.estimate = diag.running_means[k];
      records.push_back(row);
    }
    Record div_row;
    div_row.id = "moment.diverging";
    div_row.t = *mom_t;
    div_row.a = *mom_theta;
    div_row.n = diag.estimate.n_samples;
    div_row.estimate = diag.diverging ? 1.0 : 0.0;
    records.push_back(div_row);

    json running = json::array();
    for (std::size_t k = 0; k < diag.running_ns.size(); ++k) {
      running.push_back(json{{"n", diag.running_ns[k]},
                             {"mean", diag.running_means[k]}});
    }
    emit_records(*mom_opts, records,
                 json{{"op", "moment"},
                      {"t", *mom_t},
                      {"theta", *mom_theta},
                      {"variant", to_string(*mom_variant)},
                      {"params", params_json(mom_opts->mc)},
                      {"estimate", gbm::estimate_json(diag.estimate)},
                      {"running_means", running},
                      {"single_sample_domination", diag.single_sample_domination},
                      {"diverging", diag.diverging},
                      {"stabilized", diag.stabilized}});
    log_timestamp(*mom_opts, "moment done");
  });

  // ---- price ----
  auto price_opts = std::make_shared<CommonOpts>();
  auto price_spec = std::make_shared<gbm::OptionSpec>();
  auto price_nu_set = std::make_shared<bool>(false);
  auto* price = app.add_subcommand("price", "asian call prices");
  add_common(price, *price_opts, 1'000'000);
  price->add_option("--strike", price_spec->strike, "strike a > 0")
      ->capture_default_str();
  price->add_option("--t", price_spec->horizon, "horizon")->capture_default_str();
  price->add_option("--sigma", price_spec->volatility, "volatility > 0")
      ->capture_default_str();
  auto* nu_opt = price->add_option("--nu", price_spec->drift,
                                   "drift (default: -sigma^2/2, the base case)");
  price->callback([=, &exit_code]() {
    log_timestamp(*price_opts, "price start");
    if (nu_opt->count() == 0) {
      price_spec->drift =
          -0.5 * price_spec->volatility * price_spec->volatility;
    }
    std::vector<Record> records;
    json structured{{"op", "price"},
                    {"strike", price_spec->strike},
                    {"t", price_spec->horizon},
                    {"sigma", price_spec->volatility},
                    {"nu", price_spec->drift},
                    {"params", params_json(price_opts->mc)}};
    if (gbm::identity_route_available(*price_spec)) {
      const auto report = gbm::price_check(*price_spec, price_opts->mc);
      records = gbm::report_records(report, "price.direct", "price.identity",
                                    price_spec->horizon, price_spec->strike,
                                    price_spec->drift);
      structured["direct"] = gbm::estimate_json(report.lhs);
      structured["identity"] = gbm::estimate_json(report.rhs);
      structured["report"] = gbm::report_json(report);
      if (!report.pass) exit_code = kExitVerificationFailed;
    } else {
      const auto direct = gbm::price_direct(*price_spec, price_opts->mc);
      records.push_back(gbm::make_record("price.direct", price_spec->horizon,
                                         price_spec->strike, price_spec->drift,
                                         direct));
      structured["direct"] = gbm::estimate_json(direct);
      structured["identity"] = nullptr;
    }
    emit_records(*price_opts, records, structured);
    log_timestamp(*price_opts, "price done");
  });

  // ---- verify ----
  auto ver_opts = std::make_shared<CommonOpts>();
  auto ver_suite = std::make_shared<std::string>();
  auto ver_mu = std::make_shared<double>(2.0);
  auto ver_T = std::make_shared<double>(0.0);
  auto ver_u = std::make_shared<double>(0.0);
  auto ver_t = std::make_shared<double>(1.0);
  auto* ver = app.add_subcommand("verify", "oracle suites");
  add_common(ver, *ver_opts, 100'000);
  ver->add_option("--suite", *ver_suite, "dufresne | yor")
      ->required()
      ->check(CLI::IsMember({"dufresne", "yor"}));
  ver->add_option("--mu", *ver_mu, "gamma-law drift parameter")
      ->capture_default_str();
  ver->add_option("--horizon", *ver_T, "truncation horizon (0 = default 10/mu)")
      ->capture_default_str();
  ver->add_option("--u", *ver_u, "oracle argument u")->capture_default_str();
  ver->add_option("--t", *ver_t, "oracle horizon t")->capture_default_str();
  ver->callback([=, &exit_code]() {
    log_timestamp(*ver_opts, "verify start");
    if (*ver_suite == "dufresne") {
      const gbm::GammaLawSpec law{*ver_mu};
      const double horizon =
          *ver_T > 0.0 ? *ver_T : gbm::dufresne_default_horizon(*ver_mu);
      const auto ks = gbm::dufresne_ks_check(law, horizon, ver_opts->mc);
      Record row;
      row.id = "dufresne.ks";
      row.t = horizon;
      row.nu = *ver_mu;
      row.n = ks.n;
      row.estimate = ks.statistic;
      row.stderr_ = ks.threshold;
      row.pass = ks.pass;
      emit_records(*ver_opts, {row},
                   json{{"op", "verify"},
                        {"suite", "dufresne"},
                        {"mu", *ver_mu},
                        {"horizon", horizon},
                        {"params", params_json(ver_opts->mc)},
                        {"ks_statistic", ks.statistic},
                        {"threshold", ks.threshold},
                        {"pass", ks.pass}});
      if (!ks.pass) exit_code = kExitVerificationFailed;
    } else {
      const auto report = gbm::yor_mc_check(*ver_u, *ver_t, ver_opts->mc);
      const auto records = gbm::report_records(report, "yor.mc",
                                               "yor.closed_form", *ver_t,
                                               *ver_u, std::nullopt);
      emit_records(*ver_opts, records,
                   json{{"op", "verify"},
                        {"suite", "yor"},
                        {"u", *ver_u},
                        {"t", *ver_t},
                        {"params", params_json(ver_opts->mc)},
                        {"report", gbm::report_json(report)}});
      if (!report.pass) exit_code = kExitVerificationFailed;
    }
    log_timestamp(*ver_opts, "verify done");
  });

  // ---- report ----
  auto rep_opts = std::make_shared<CommonOpts>();
  auto* rep = app.add_subcommand("report", "run the full verification grid");
  add_common(rep, *rep_opts, 1'000'000);
  rep->callback([=, &exit_code]() {
    log_timestamp(*rep_opts, "report start");
    gbm::AcceptanceOptions options;
    options.n = rep_opts->mc.n_samples;
    options.steps = rep_opts->mc.steps;
    options.seed = rep_opts->mc.seed;
    options.threads = rep_opts->mc.threads;
    const auto results =
        gbm::run_acceptance(options, [](const gbm::CriterionResult& r) {
          std::fprintf(stderr, "criterion %d (%s): %s%s — %s\n", r.criterion,
                       r.name.c_str(), r.pass ? "PASS" : "FAIL",
                       r.asserted ? "" : " (reported only)", r.detail.c_str());
        });
    std::vector<Record> records;
    for (const auto& r : results) {
      records.insert(records.end(), r.records.begin(), r.records.end());
    }
    json criteria = json::array();
    for (const auto& r : results) {
      criteria.push_back(json{{"criterion", r.criterion},
                              {"name", r.name},
                              {"pass", r.pass},
                              {"asserted", r.asserted},
                              {"detail", r.detail},
                              {"records", gbm::to_json(r.records)}});
    }
    emit_records(*rep_opts, records,
                 json{{"op", "report"}, {"criteria", criteria}});
    if (!gbm::all_asserted_pass(results)) exit_code = kExitVerificationFailed;
    log_timestamp(*rep_opts, "report done");
  });

  try {
    auto args = expand_config_args(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
}
