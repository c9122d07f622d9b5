// Command-line front end: constants, simulate, bias-sweep, time-uniformity,
// tail-study, localize. Exit codes: 0 success, 1 usage or validation errors,
// 2 runtime failures, 3 verdict failures.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfsgd/config.hpp"
#include "mfsgd/csv.hpp"
#include "mfsgd/experiments.hpp"

namespace {

using nlohmann::json;

struct CommonOpts {
  std::string config;
  std::string out;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "run configuration file (JSON, comments allowed)")
      ->required();
  cmd->add_option("--out", o.out,
                  "output directory (overrides MFSGD_OUT_DIR and the config)");
  cmd->add_option("--threads", o.threads, "worker threads for trials (default 1)");
}

// Precedence: --out, then MFSGD_OUT_DIR, then config.output.directory.
std::string resolve_out(const mfsgd::RunConfig& rc, const std::string& cli_out) {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("MFSGD_OUT_DIR"); env && *env) return env;
  return rc.out_dir;
}

// Loads and fully validates; on failure prints every error and returns
// nullopt (caller exits 1).
std::optional<mfsgd::RunConfig> load_or_report(const std::string& path) {
  mfsgd::ParseResult pr = mfsgd::load_config(path);
  for (const auto& w : pr.warnings) std::cerr << "warning: " << w << "\n";
  if (!pr.config) {
    std::cerr << "configuration errors (" << pr.errors.size() << "):\n";
    for (const auto& e : pr.errors) std::cerr << "  " << e << "\n";
  }
  return pr.config;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  f << text;
}

json trials_json(const mfsgd::MetricTrialsResult& t) {
  json j;
  j["failures"] = t.failures;
  j["total_trials"] = t.total_trials;
  j["invalid"] = t.invalid;
  j["warnings"] = t.warnings;
  return j;
}

int run_constants(const mfsgd::RunConfig& rc) {
  std::string csv = mfsgd::ledger_csv_header();
  for (long w : rc.plan.widths) {
    mfsgd::Hyperparams hp = rc.inputs.hp;
    hp.N = w;
    mfsgd::StabilityLedger lg = mfsgd::build_ledger(rc.inputs.model, hp, rc.inputs.ledger);
    std::cout << mfsgd::render_ledger_text(lg) << "\n";
    csv += mfsgd::ledger_csv_row(lg);
  }
  std::cout << csv;
  return 0;
}

int run_simulate_cmd(const mfsgd::RunConfig& rc, const std::string& out_dir) {
  auto rows = mfsgd::run_simulate(rc.plan, rc.inputs);
  std::filesystem::path csv_path =
      std::filesystem::path(out_dir) / (rc.prefix + "_trials.csv");
  mfsgd::emit_csv(rows, csv_path);
  std::cout << "wrote " << rows.size() << " rows to " << csv_path.string() << "\n";
  return 0;
}

int run_bias_cmd(const mfsgd::RunConfig& rc, const std::string& out_dir, int threads) {
  auto s = mfsgd::run_bias_sweep(rc.plan, rc.inputs, threads);
  for (const auto& w : s.trials.warnings) std::cerr << w << "\n";
  std::vector<mfsgd::TrialRow> all = s.trials.rows;
  all.insert(all.end(), s.trials.aggregates.begin(), s.trials.aggregates.end());
  std::filesystem::path base(out_dir);
  mfsgd::emit_csv(all, base / (rc.prefix + "_trials.csv"));
  json j;
  j["study"] = "bias-sweep";
  j["trials"] = trials_json(s.trials);
  j["slope_window"] = {{"testfn", {mfsgd::kSlopeLo, mfsgd::kSlopeHi}},
                       {"sw1", {mfsgd::kSlopeLo, mfsgd::kSlopeHi}},
                       {"w1_max", mfsgd::kSlopeHi}};
  for (const auto& [metric, by_t] : s.slopes)
    for (const auto& [t, fit] : by_t) {
      json f;
      f["slope"] = fit.slope;
      f["intercept"] = fit.intercept;
      f["r2"] = fit.r2;
      j["slopes"][metric][mfsgd::fmt17(t)] = f;
      std::cout << "slope[" << metric << ", t=" << t << "] = " << fit.slope
                << " (r2 = " << fit.r2 << ")\n";
    }
  j["pass"] = s.pass;
  write_text(base / (rc.prefix + "_summary.json"), j.dump(2) + "\n");
  if (s.trials.invalid) {
    std::cerr << "study invalid: " << s.trials.failures << " failed trials of "
              << s.trials.total_trials << "\n";
    return 2;
  }
  std::cout << (s.pass ? "verdict: PASS" : "verdict: FAIL") << "\n";
  return s.pass ? 0 : 3;
}

int run_time_cmd(const mfsgd::RunConfig& rc, const std::string& out_dir, int threads) {
  auto s = mfsgd::run_time_uniformity(rc.plan, rc.inputs, threads);
  std::vector<mfsgd::TrialRow> all = s.trials.rows;
  all.insert(all.end(), s.trials.aggregates.begin(), s.trials.aggregates.end());
  std::filesystem::path base(out_dir);
  mfsgd::emit_csv(all, base / (rc.prefix + "_trials.csv"));
  json j;
  j["study"] = "time-uniformity";
  j["trials"] = trials_json(s.trials);
  for (const auto& [t, v] : s.mean_testfn) j["mean_testfn"][mfsgd::fmt17(t)] = v;
  j["flatness"] = s.flatness;
  j["diagnostic_only"] = s.diagnostic_only;
  j["pass"] = s.pass;
  write_text(base / (rc.prefix + "_summary.json"), j.dump(2) + "\n");
  std::cout << "flatness ratio over t >= 1: " << s.flatness << "\n";
  if (s.trials.invalid) return 2;
  if (s.diagnostic_only) {
    std::cout << "inadmissible ledger: diagnostic run, no verdict\n";
    return 0;
  }
  std::cout << (s.pass ? "verdict: PASS" : "verdict: FAIL") << "\n";
  return s.pass ? 0 : 3;
}

int run_tail_cmd(const mfsgd::RunConfig& rc, const std::string& out_dir, int threads) {
  auto s = mfsgd::run_tail_study(rc.plan, rc.inputs, threads);
  std::vector<mfsgd::TrialRow> all = s.trials.rows;
  all.insert(all.end(), s.trials.aggregates.begin(), s.trials.aggregates.end());
  // Tail table rows: the threshold r rides in the t column.
  for (const auto& [N, r, emp, bound] : s.table) {
    all.push_back({"tail-study", N, 0, r, "tail_empirical", emp, 0.0, "aggregate"});
    if (bound)
      all.push_back({"tail-study", N, 0, r, "tail_bound", *bound, 0.0, "aggregate"});
  }
  std::filesystem::path base(out_dir);
  mfsgd::emit_csv(all, base / (rc.prefix + "_trials.csv"));
  json j;
  j["study"] = "tail-study";
  j["trials"] = trials_json(s.trials);
  for (const auto& [N, v] : s.s_N) {
    j["s_N"][std::to_string(N)] = v;
    std::cout << "s_N(" << N << ") = " << v << "\n";
  }
  j["ratio_lo"] = s.ratio_lo;
  j["ratio_hi"] = s.ratio_hi;
  j["pass"] = s.pass;
  write_text(base / (rc.prefix + "_summary.json"), j.dump(2) + "\n");
  if (s.trials.invalid) return 2;
  std::cout << (s.pass ? "verdict: PASS" : "verdict: FAIL") << "\n";
  return s.pass ? 0 : 3;
}

int run_localize_cmd(const mfsgd::RunConfig& rc, const std::string& out_dir, int threads) {
  auto s = mfsgd::run_localization_audit(rc.plan, rc.inputs, threads);
  std::filesystem::path base(out_dir);
  mfsgd::emit_csv(s.rows, base / (rc.prefix + "_trials.csv"));
  json j;
  j["study"] = "localize";
  j["a_inf"] = s.a_inf;
  j["R_inf"] = s.R_inf;
  j["worst_norm"] = s.worst_norm;
  j["violations"] = s.violations;
  j["failures"] = s.failures;
  j["pass"] = s.pass;
  write_text(base / (rc.prefix + "_summary.json"), j.dump(2) + "\n");
  std::cout << "max particle norm " << s.worst_norm << " vs R_inf " << s.R_inf << " ("
            << s.violations << " violations)\n";
  std::cout << (s.pass ? "verdict: PASS" : "verdict: FAIL") << "\n";
  return s.pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field SGD laboratory: coupled particle simulations, stability\n"
               "constants, and optimal-transport discrepancy studies"};
  app.require_subcommand(1);
  CommonOpts oc, os, ob, ot, ol, oz;
  CLI::App* c_const = app.add_subcommand("constants", "print the stability ledger");
  c_const->add_option("--config", oc.config, "run configuration file")->required();
  CLI::App* c_sim = app.add_subcommand("simulate", "single coupled trial, per-time records");
  add_common(c_sim, os);
  CLI::App* c_bias = app.add_subcommand("bias-sweep", "discrepancy decay across widths");
  add_common(c_bias, ob);
  CLI::App* c_time = app.add_subcommand("time-uniformity", "discrepancy flatness over time");
  add_common(c_time, ot);
  CLI::App* c_tail = app.add_subcommand("tail-study", "trial-level concentration statistics");
  add_common(c_tail, ol);
  CLI::App* c_loc = app.add_subcommand("localize", "hard norm-bound audit (localized regime)");
  add_common(c_loc, oz);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (c_const->parsed()) {
      auto rc = load_or_report(oc.config);
      if (!rc) return 1;
      return run_constants(*rc);
    }
    const CommonOpts& o = c_sim->parsed()    ? os
                          : c_bias->parsed() ? ob
                          : c_time->parsed() ? ot
                          : c_tail->parsed() ? ol
                                             : oz;
    auto rc = load_or_report(o.config);
    if (!rc) return 1;
    std::string out_dir = resolve_out(*rc, o.out);
    // The subcommand decides the study; the config's experiment.study is a
    // default so one file can drive several commands.
    if (c_sim->parsed()) return run_simulate_cmd(*rc, out_dir);
    if (c_bias->parsed()) {
      rc->plan.study = mfsgd::Study::BiasSweep;
      return run_bias_cmd(*rc, out_dir, o.threads);
    }
    if (c_time->parsed()) {
      rc->plan.study = mfsgd::Study::TimeUniformity;
      return run_time_cmd(*rc, out_dir, o.threads);
    }
    if (c_tail->parsed()) {
      rc->plan.study = mfsgd::Study::TailStudy;
      return run_tail_cmd(*rc, out_dir, o.threads);
    }
    if (c_loc->parsed()) {
      rc->plan.study = mfsgd::Study::LocalizationAudit;
      return run_localize_cmd(*rc, out_dir, o.threads);
    }
  } catch (const mfsgd::PreconditionError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return 1;
  } catch (const mfsgd::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
