#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfsgd/experiments.hpp"

namespace mfsgd {

struct RunConfig {
  StudyInputs inputs;
  ExperimentPlan plan;
  std::string out_dir = "out";
  std::string prefix;
};

// Every validation problem is reported, each message carrying the key path
// that caused it; callers get the full list in one shot.
struct ParseResult {
  std::optional<RunConfig> config;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
};

namespace cfg_detail {

using nlohmann::json;

inline bool expect_object(const json& j, const std::string& path,
                          std::vector<std::string>& errs) {
  if (j.is_object()) return true;
  errs.push_back(path + ": expected an object");
  return false;
}

inline std::optional<double> get_num(const json& j, const std::string& path,
                                     const std::string& key, bool required,
                                     std::vector<std::string>& errs) {
  if (!j.contains(key)) {
    if (required) errs.push_back(path + "." + key + ": missing");
    return std::nullopt;
  }
  if (!j[key].is_number()) {
    errs.push_back(path + "." + key + ": expected a number");
    return std::nullopt;
  }
  return j[key].get<double>();
}

inline std::optional<std::string> get_str(const json& j, const std::string& path,
                                          const std::string& key, bool required,
                                          std::vector<std::string>& errs) {
  if (!j.contains(key)) {
    if (required) errs.push_back(path + "." + key + ": missing");
    return std::nullopt;
  }
  if (!j[key].is_string()) {
    errs.push_back(path + "." + key + ": expected a string");
    return std::nullopt;
  }
  return j[key].get<std::string>();
}

inline std::optional<std::vector<double>> get_num_array(const json& j, const std::string& path,
                                                        const std::string& key, bool required,
                                                        std::vector<std::string>& errs) {
  if (!j.contains(key)) {
    if (required) errs.push_back(path + "." + key + ": missing");
    return std::nullopt;
  }
  if (!j[key].is_array()) {
    errs.push_back(path + "." + key + ": expected an array of numbers");
    return std::nullopt;
  }
  std::vector<double> out;
  for (const auto& v : j[key]) {
    if (!v.is_number()) {
      errs.push_back(path + "." + key + ": expected an array of numbers");
      return std::nullopt;
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace cfg_detail

// Parses the single structured config file (JSON, comments allowed). The key
// schema, not the syntax, is the contract; see README for the full schema.
inline ParseResult parse_config(const std::string& text) {
  using nlohmann::json;
  ParseResult res;
  auto& errs = res.errors;
  json root;
  try {
    root = json::parse(text, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const std::exception& e) {
    errs.push_back(std::string("config: JSON parse failure: ") + e.what());
    return res;
  }
  if (!root.is_object()) {
    errs.push_back("config: top level must be an object");
    return res;
  }

  RunConfig rc;

  // hyperparams ------------------------------------------------------------
  double alpha = 1.0, lambda = 0.0;
  int D = 1;
  if (root.contains("hyperparams") &&
      cfg_detail::expect_object(root["hyperparams"], "hyperparams", errs)) {
    const auto& h = root["hyperparams"];
    if (auto v = cfg_detail::get_num(h, "hyperparams", "alpha", true, errs)) {
      if (*v <= 0)
        errs.push_back("hyperparams.alpha: must be positive");
      else
        alpha = *v;
    }
    if (auto v = cfg_detail::get_num(h, "hyperparams", "lambda", true, errs)) {
      if (*v < 0)
        errs.push_back("hyperparams.lambda: must be >= 0");
      else
        lambda = *v;
    }
    if (auto v = cfg_detail::get_num(h, "hyperparams", "D", true, errs)) {
      if (*v < 1 || *v != std::floor(*v))
        errs.push_back("hyperparams.D: must be a positive integer");
      else
        D = static_cast<int>(*v);
    }
    if (auto ws = cfg_detail::get_num_array(h, "hyperparams", "widths", true, errs)) {
      for (double w : *ws) {
        if (w < 1 || w != std::floor(w)) {
          errs.push_back("hyperparams.widths: widths must be positive integers");
          break;
        }
        rc.plan.widths.push_back(static_cast<long>(w));
      }
    }
  } else {
    errs.push_back("hyperparams: missing");
  }
  rc.inputs.hp.alpha = alpha;
  rc.inputs.hp.lambda = lambda;
  rc.inputs.hp.D = D;
  rc.inputs.hp.N = rc.plan.widths.empty() ? 1 : rc.plan.widths.front();

  // model -------------------------------------------------------------------
  if (root.contains("model") && cfg_detail::expect_object(root["model"], "model", errs)) {
    const auto& m = root["model"];
    auto name = cfg_detail::get_str(m, "model", "name", true, errs);
    double data_radius =
        cfg_detail::get_num(m, "model", "data_radius", true, errs).value_or(1.0);
    if (data_radius <= 0) errs.push_back("model.data_radius: must be positive");
    if (name) {
      if (*name == "tanh-dot") {
        double pr = cfg_detail::get_num(m, "model", "param_radius", false, errs).value_or(1.0);
        rc.inputs.model = make_tanh_dot(D, data_radius, pr);
      } else if (*name == "softplus-dot") {
        double pr = cfg_detail::get_num(m, "model", "param_radius", false, errs).value_or(2.0);
        rc.inputs.model = make_softplus_dot(D, data_radius, pr);
      } else {
        errs.push_back("model.name: unknown model '" + *name +
                       "' (built-ins: tanh-dot, softplus-dot)");
      }
    }
  } else {
    errs.push_back("model: missing");
  }

  // data ----------------------------------------------------------------
  if (root.contains("data") && cfg_detail::expect_object(root["data"], "data", errs)) {
    const auto& d = root["data"];
    if (!d.contains("atoms") || !d["atoms"].is_array() || d["atoms"].empty()) {
      errs.push_back("data.atoms: need a nonempty atom list");
    } else {
      size_t i = 0;
      for (const auto& a : d["atoms"]) {
        std::string path = "data.atoms[" + std::to_string(i) + "]";
        DataAtom atom;
        if (!a.is_object()) {
          errs.push_back(path + ": expected an object");
          ++i;
          continue;
        }
        if (auto x = cfg_detail::get_num_array(a, path, "x", true, errs)) atom.x = *x;
        atom.y = cfg_detail::get_num(a, path, "y", true, errs).value_or(0.0);
        atom.p = cfg_detail::get_num(a, path, "p", true, errs).value_or(0.0);
        rc.inputs.data.atoms.push_back(std::move(atom));
        ++i;
      }
    }
  } else {
    errs.push_back("data: missing");
  }

  // init ----------------------------------------------------------------
  rc.inputs.init.dim = D;
  if (root.contains("init") && cfg_detail::expect_object(root["init"], "init", errs)) {
    const auto& ini = root["init"];
    auto kind = cfg_detail::get_str(ini, "init", "kind", true, errs).value_or("uniform_ball");
    if (kind == "uniform_ball")
      rc.inputs.init.kind = InitialDistribution::Kind::UniformBall;
    else if (kind == "sphere")
      rc.inputs.init.kind = InitialDistribution::Kind::Sphere;
    else if (kind == "gaussian")
      rc.inputs.init.kind = InitialDistribution::Kind::Gaussian;
    else if (kind == "point")
      rc.inputs.init.kind = InitialDistribution::Kind::Point;
    else
      errs.push_back("init.kind: unknown kind '" + kind + "'");
    if (rc.inputs.init.kind == InitialDistribution::Kind::Point) {
      if (auto p = cfg_detail::get_num_array(ini, "init", "point", true, errs)) {
        if (static_cast<int>(p->size()) != D)
          errs.push_back("init.point: dimension does not match hyperparams.D");
        rc.inputs.init.point = *p;
      }
    } else {
      double r = cfg_detail::get_num(ini, "init", "radius", true, errs).value_or(1.0);
      if (r <= 0) errs.push_back("init.radius: must be positive");
      rc.inputs.init.radius = r;
    }
  }

  // ledger inputs ---------------------------------------------------------
  double max_abs_y = 0.0, max_z = 0.0;
  for (const auto& a : rc.inputs.data.atoms) {
    max_abs_y = std::max(max_abs_y, std::abs(a.y));
    max_z = std::max({max_z, std::abs(a.y), norm2(a.x)});
  }
  rc.inputs.ledger.A = max_abs_y;
  double r0_default = rc.inputs.init.support_radius();
  rc.inputs.ledger.R0 = r0_default;
  rc.inputs.ledger.Cpi_1 = rc.inputs.ledger.Cpi_2 = max_z * max_z / 4.0;
  if (root.contains("ledger") && cfg_detail::expect_object(root["ledger"], "ledger", errs)) {
    const auto& lg = root["ledger"];
    if (auto v = cfg_detail::get_num(lg, "ledger", "A", false, errs)) rc.inputs.ledger.A = *v;
    if (auto v = cfg_detail::get_num(lg, "ledger", "R0", false, errs)) rc.inputs.ledger.R0 = *v;
    if (auto v = cfg_detail::get_num_array(lg, "ledger", "C0", false, errs)) {
      if (v->size() != 2)
        errs.push_back("ledger.C0: expected [C0_1, C0_2]");
      else {
        rc.inputs.ledger.C0_1 = (*v)[0];
        rc.inputs.ledger.C0_2 = (*v)[1];
      }
    }
    if (auto v = cfg_detail::get_num_array(lg, "ledger", "Cpi", false, errs)) {
      if (v->size() != 2)
        errs.push_back("ledger.Cpi: expected [Cpi_1, Cpi_2]");
      else {
        rc.inputs.ledger.Cpi_1 = (*v)[0];
        rc.inputs.ledger.Cpi_2 = (*v)[1];
      }
    }
  }
  if (!std::isfinite(rc.inputs.ledger.R0))
    errs.push_back("ledger.R0: required explicitly for a non-compact init law");
  else if (!root.contains("ledger") || !root["ledger"].contains("C0")) {
    double r0 = rc.inputs.ledger.R0;
    rc.inputs.ledger.C0_1 = rc.inputs.ledger.C0_2 = r0 * r0 / 4.0;
  }

  // experiment ------------------------------------------------------------
  if (root.contains("experiment") &&
      cfg_detail::expect_object(root["experiment"], "experiment", errs)) {
    const auto& e = root["experiment"];
    auto study = cfg_detail::get_str(e, "experiment", "study", true, errs).value_or("");
    if (study == "bias-sweep")
      rc.plan.study = Study::BiasSweep;
    else if (study == "time-uniformity")
      rc.plan.study = Study::TimeUniformity;
    else if (study == "tail-study")
      rc.plan.study = Study::TailStudy;
    else if (study == "localize")
      rc.plan.study = Study::LocalizationAudit;
    else if (study == "simulate")
      rc.plan.study = Study::Simulate;
    else if (!study.empty())
      errs.push_back("experiment.study: unknown study '" + study + "'");
    if (auto v = cfg_detail::get_num_array(e, "experiment", "times", false, errs))
      rc.plan.times = *v;
    if (auto v = cfg_detail::get_num(e, "experiment", "trials", false, errs))
      rc.plan.trials = static_cast<long>(*v);
    if (auto v = cfg_detail::get_num(e, "experiment", "master_seed", false, errs))
      rc.plan.master_seed = static_cast<uint64_t>(*v);
    if (auto v = cfg_detail::get_num(e, "experiment", "n_dirs", false, errs))
      rc.plan.n_dirs = static_cast<long>(*v);
    if (auto v = cfg_detail::get_num(e, "experiment", "M_ref", false, errs))
      rc.plan.M_ref = static_cast<long>(*v);
    if (auto v = cfg_detail::get_num(e, "experiment", "h_ref", false, errs))
      rc.plan.h_ref = *v;
    if (auto v = cfg_detail::get_num(e, "experiment", "w1_cap", false, errs))
      rc.plan.w1_cap = static_cast<long>(*v);
    if (auto v = cfg_detail::get_num(e, "experiment", "steps", false, errs))
      rc.plan.steps = static_cast<long>(*v);
    if (auto v = cfg_detail::get_num_array(e, "experiment", "probe_x", false, errs))
      rc.plan.probe_x = *v;
    if (e.contains("compare_reference")) {
      if (e["compare_reference"].is_boolean())
        rc.plan.compare_reference = e["compare_reference"].get<bool>();
      else
        errs.push_back("experiment.compare_reference: expected a boolean");
    }
    if (e.contains("metrics")) {
      if (!e["metrics"].is_array()) {
        errs.push_back("experiment.metrics: expected an array of metric names");
      } else {
        rc.plan.metric_testfn = rc.plan.metric_w1 = rc.plan.metric_sw1 = false;
        for (const auto& mname : e["metrics"]) {
          std::string s = mname.is_string() ? mname.get<std::string>() : "";
          if (s == "testfn")
            rc.plan.metric_testfn = true;
          else if (s == "w1")
            rc.plan.metric_w1 = true;
          else if (s == "sw1")
            rc.plan.metric_sw1 = true;
          else
            errs.push_back("experiment.metrics: unknown metric '" + s + "'");
        }
      }
    }
  } else {
    errs.push_back("experiment: missing");
  }

  // output ------------------------------------------------------------
  rc.prefix = study_name(rc.plan.study);
  if (root.contains("output") && cfg_detail::expect_object(root["output"], "output", errs)) {
    if (auto v = cfg_detail::get_str(root["output"], "output", "directory", false, errs))
      rc.out_dir = *v;
    if (auto v = cfg_detail::get_str(root["output"], "output", "prefix", false, errs))
      rc.prefix = *v;
  }

  // cross-checks ------------------------------------------------------------
  if (errs.empty()) {
    auto data_errs =
        rc.inputs.data.validate(rc.inputs.ledger.A, rc.inputs.model.data_radius);
    errs.insert(errs.end(), data_errs.begin(), data_errs.end());
    auto plan_errs = validate_plan(rc.plan, rc.inputs);
    errs.insert(errs.end(), plan_errs.begin(), plan_errs.end());
    if (rc.inputs.model.regime == Regime::Localized &&
        rc.inputs.hp.lambda < rc.inputs.model.M * rc.inputs.model.c)
      res.warnings.push_back(
          "hyperparams.lambda: below M*c; the localized-regime guarantees do not apply");
  }

  if (errs.empty()) res.config = std::move(rc);
  return res;
}

inline ParseResult load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    ParseResult r;
    r.errors.push_back("config: cannot open '" + path + "'");
    return r;
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

}  // namespace mfsgd
