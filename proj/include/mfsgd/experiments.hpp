#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <tuple>
#include <vector>

#include "mfsgd/constants.hpp"
#include "mfsgd/csv.hpp"
#include "mfsgd/dynamics.hpp"
#include "mfsgd/metrics.hpp"

namespace mfsgd {

enum class Study { BiasSweep, TimeUniformity, TailStudy, LocalizationAudit, Simulate };

inline const char* study_name(Study s) {
  switch (s) {
    case Study::BiasSweep: return "bias-sweep";
    case Study::TimeUniformity: return "time-uniformity";
    case Study::TailStudy: return "tail-study";
    case Study::LocalizationAudit: return "localize";
    case Study::Simulate: return "simulate";
  }
  return "?";
}

struct ExperimentPlan {
  Study study = Study::BiasSweep;
  std::vector<long> widths;
  std::vector<double> times{0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
  long trials = 2;
  uint64_t master_seed = 1;
  bool metric_testfn = true, metric_w1 = true, metric_sw1 = true;
  long n_dirs = 2048;
  long M_ref = 0;      // 0 -> 8 * max(widths)
  double h_ref = 0.0;  // 0 -> min(1 / max(widths), 0.01)
  long w1_cap = 4096;
  long steps = 0;                  // localization audit: SGD steps per trial
  bool compare_reference = false;  // additionally emit *_vs_ref metrics
  std::vector<double> probe_x;     // probe input of the test function

  long max_width() const {
    long w = 0;
    for (long v : widths) w = std::max(w, v);
    return w;
  }
  long effective_M_ref() const { return M_ref > 0 ? M_ref : 8 * max_width(); }
  double effective_h_ref() const {
    return h_ref > 0 ? h_ref : std::min(1.0 / static_cast<double>(max_width()), 0.01);
  }
};

struct StudyInputs {
  ActivationModel model;
  DiscreteDataDistribution data;
  Hyperparams hp;  // N is taken per width from the plan
  InitialDistribution init;
  LedgerInputs ledger;
};

inline std::vector<std::string> validate_plan(const ExperimentPlan& plan,
                                              const StudyInputs& in) {
  std::vector<std::string> errs;
  if (plan.widths.empty()) errs.push_back("experiment.widths: must be nonempty");
  for (size_t i = 0; i + 1 < plan.widths.size(); ++i)
    if (plan.widths[i] >= plan.widths[i + 1])
      errs.push_back("experiment.widths: must be strictly ascending");
  for (long w : plan.widths)
    if (w < 1) errs.push_back("experiment.widths: widths must be >= 1");
  if (plan.study != Study::Simulate && plan.trials < 2)
    errs.push_back("experiment.trials: need >= 2 for variance statistics");
  if (plan.study == Study::LocalizationAudit) {
    if (plan.steps < 1) errs.push_back("experiment.steps: localization audit needs steps >= 1");
  } else {
    if (plan.times.empty()) errs.push_back("experiment.times: must be nonempty");
    for (double t : plan.times)
      if (t < 0) errs.push_back("experiment.times: times must be >= 0");
    if (!plan.widths.empty() && plan.max_width() * 8 > plan.effective_M_ref())
      errs.push_back("experiment.M_ref: must be >= 8 * max(widths) (design margin)");
  }
  if (plan.n_dirs < 1) errs.push_back("experiment.n_dirs: must be >= 1");
  if (in.model.theta_dim != in.hp.D)
    errs.push_back("hyperparams.D: does not match the model parameter dimension");
  if (!in.data.atoms.empty() && in.data.input_dim() != in.model.input_dim)
    errs.push_back("data.atoms[*].x: dimension does not match the model input dimension");
  return errs;
}

// Trial seeds: mix_seed(master, width_index, trial_index). Auxiliary streams
// (reference init, W1 subsampling, SW1 directions) hang off purpose tags so
// measurement randomness is independent of the data-stream position.
inline uint64_t trial_seed(uint64_t master, size_t width_idx, long trial_idx) {
  return mix_seed(master, width_idx, static_cast<uint64_t>(trial_idx));
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

// OLS of log(value) on log(N). Nonpositive values are an input error, not NaN.
inline SlopeFit fit_loglog_slope(std::span<const std::pair<double, double>> pts) {
  if (pts.size() < 2) throw std::invalid_argument("fit_loglog_slope: need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [n, v] : pts) {
    if (!(n > 0) || !(v > 0))
      throw std::invalid_argument("fit_loglog_slope: nonpositive input (N = " +
                                  std::to_string(n) + ", value = " + std::to_string(v) + ")");
    double x = std::log(n), y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double n = static_cast<double>(pts.size());
  double denom = sxx - sx * sx / n;
  if (denom <= 0) throw std::invalid_argument("fit_loglog_slope: degenerate abscissae");
  SlopeFit fit;
  fit.slope = (sxy - sx * sy / n) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_tot = 0, ss_res = 0, ybar = sy / n;
  for (auto [nn, v] : pts) {
    double y = std::log(v);
    double pred = fit.intercept + fit.slope * std::log(nn);
    ss_tot += (y - ybar) * (y - ybar);
    ss_res += (y - pred) * (y - pred);
  }
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

namespace detail {

template <typename F>
void parallel_for(long n, int threads, F&& f) {
  threads = std::max(1, threads);
  if (threads == 1 || n <= 1) {
    for (long i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      long i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int k = static_cast<int>(std::min<long>(threads, n));
  pool.reserve(k);
  for (int t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trial execution

// One coupled trial at width N: run SGD + twins to max(times), measuring the
// three discrepancies between the SGD ensemble and its twin ensemble at every
// requested time (they have equal initial draws, so every t = 0 row is an
// exact zero). With compare_reference set, the same metrics are also taken
// against the frozen reference (full ensemble for the test function, a seeded
// without-replacement subsample of size N for W1 / SW1) as *_vs_ref rows.
inline std::vector<TrialRow> run_one_trial(const ExperimentPlan& plan, const StudyInputs& in,
                                           const ReferenceTrajectory& ref,
                                           const TestFunction& probe, long N,
                                           size_t width_idx, long trial_idx) {
  const char* name = study_name(plan.study);
  uint64_t seed = trial_seed(plan.master_seed, width_idx, trial_idx);
  Hyperparams hp = in.hp;
  hp.N = N;
  Rng rng(seed);
  CoupledSystem cs = make_coupled(in.init, N, rng);

  std::vector<long> obs_steps;
  for (double t : plan.times) obs_steps.push_back(std::llround(t * static_cast<double>(N)));
  std::sort(obs_steps.begin(), obs_steps.end());
  obs_steps.erase(std::unique(obs_steps.begin(), obs_steps.end()), obs_steps.end());
  long n_steps = obs_steps.empty() ? 0 : obs_steps.back();

  std::vector<TrialRow> rows;
  auto requested_t = [&](double t_grid) {
    // report the requested time, not the rounded step
    for (double t : plan.times)
      if (std::llround(t * static_cast<double>(N)) == std::llround(t_grid * N)) return t;
    return t_grid;
  };

  auto measure = [&](const CoupledSystem& cur, double t_grid) {
    double t = requested_t(t_grid);
    size_t time_idx = 0;
    for (size_t k = 0; k < plan.times.size(); ++k)
      if (plan.times[k] == t) time_idx = k;
    if (plan.metric_testfn)
      rows.push_back({name, N, seed, t, "testfn",
                      delta_testfn(cur.sgd.theta, cur.twins.theta, probe), 0.0, "ok"});
    if (plan.metric_w1) {
      double w = (cur.sgd.theta.cols == 1)
                     ? w1_sorted_1d(cur.sgd.theta, cur.twins.theta)
                     : w1_exact(cur.sgd.theta, cur.twins.theta, plan.w1_cap);
      rows.push_back({name, N, seed, t, "w1", w, 0.0, "ok"});
    }
    if (plan.metric_sw1) {
      auto r = sw1_montecarlo(cur.sgd.theta, cur.twins.theta, plan.n_dirs,
                              mix_seed(seed, kTagDirections, time_idx));
      rows.push_back({name, N, seed, t, "sw1", r.estimate, r.std_error, "ok"});
    }
    if (plan.compare_reference) {
      const ParticleMatrix& snap = ref.snapshot_at(t);
      if (plan.metric_testfn)
        rows.push_back({name, N, seed, t, "testfn_vs_ref",
                        delta_testfn(cur.sgd.theta, snap, probe), 0.0, "ok"});
      EmpiricalMeasure sub =
          subsample_measure(snap, N, mix_seed(seed, kTagSubsample, time_idx));
      if (plan.metric_w1) {
        double w = (cur.sgd.theta.cols == 1) ? w1_sorted_1d(cur.sgd.theta, sub)
                                             : w1_exact(cur.sgd.theta, sub, plan.w1_cap);
        rows.push_back({name, N, seed, t, "w1_vs_ref", w, 0.0, "ok"});
      }
      if (plan.metric_sw1) {
        auto r = sw1_montecarlo(cur.sgd.theta, sub, plan.n_dirs,
                                mix_seed(seed, kTagDirections, time_idx));
        rows.push_back({name, N, seed, t, "sw1_vs_ref", r.estimate, r.std_error, "ok"});
      }
    }
  };

  try {
    double max_norm = run_coupled(cs, n_steps, ref, in.data, in.model, hp, rng, obs_steps,
                                  measure);
    rows.push_back({name, N, seed, plan.times.back(), "max_norm", max_norm, 0.0, "ok"});
  } catch (const DivergenceError& e) {
    rows.clear();
    rows.push_back({name, N, seed,
                    static_cast<double>(e.step) / static_cast<double>(N), "divergence",
                    static_cast<double>(e.step), 0.0, "failed"});
  }
  return rows;
}

struct MetricTrialsResult {
  std::vector<TrialRow> rows;        // per-trial records, sorted
  std::vector<TrialRow> aggregates;  // per (N, t, metric) mean/sem rows
  long failures = 0;
  long total_trials = 0;
  bool invalid = false;  // more than 1% failed trials
  std::vector<std::string> warnings;
  ReferenceTrajectory reference;
};

// Aggregate ok rows by (N, t, metric); rows must be pre-sorted. Means and
// standard errors are accumulated in sorted order, so the result is
// deterministic regardless of the trial execution schedule.
inline std::vector<TrialRow> aggregate_rows(const std::vector<TrialRow>& sorted_rows) {
  std::map<std::tuple<long, double, std::string>, std::pair<std::vector<double>, std::string>>
      groups;
  for (const auto& r : sorted_rows) {
    if (r.status != "ok") continue;
    groups[{r.N, r.t, r.metric}].first.push_back(r.value);
    groups[{r.N, r.t, r.metric}].second = r.study;
  }
  std::vector<TrialRow> out;
  for (const auto& [key, entry] : groups) {
    const auto& vals = entry.first;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    double sem = vals.size() > 1
                     ? std::sqrt(var / (static_cast<double>(vals.size()) - 1.0) /
                                 static_cast<double>(vals.size()))
                     : 0.0;
    out.push_back({entry.second, std::get<0>(key), 0, std::get<1>(key), std::get<2>(key),
                   mean, sem, "aggregate"});
  }
  return out;
}

inline MetricTrialsResult run_metric_trials(const ExperimentPlan& plan,
                                            const StudyInputs& in, int threads) {
  auto errs = validate_plan(plan, in);
  if (!errs.empty()) {
    std::string msg = "invalid plan:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  MetricTrialsResult res;

  // Distinct-seed sanity across the whole grid (collisions would silently
  // correlate trials).
  std::set<uint64_t> seen;
  for (size_t w = 0; w < plan.widths.size(); ++w)
    for (long tr = 0; tr < plan.trials; ++tr)
      if (!seen.insert(trial_seed(plan.master_seed, w, tr)).second)
        throw ConfigError("trial seed collision; change master_seed");

  for (size_t w = 0; w < plan.widths.size(); ++w) {
    Hyperparams hp = in.hp;
    hp.N = plan.widths[w];
    StabilityLedger lg = build_ledger(in.model, hp, in.ledger);
    if (lg.N_star && !lg.admissible_width)
      res.warnings.push_back("WARNING: width N = " + std::to_string(hp.N) +
                             " is below N_star = " + std::to_string(*lg.N_star) +
                             "; concentration guarantees do not apply");
  }

  // Observation steps are llround(t * N), which can overshoot t by up to
  // 0.5 / N; the reference horizon must cover the smallest width's overshoot.
  double T = 0.0;
  for (double t : plan.times) T = std::max(T, t);
  T += 0.5 / static_cast<double>(plan.widths.front());
  res.reference = evolve_reference_summary(
      mix_seed(plan.master_seed, kTagReference, 0), plan.effective_M_ref(),
      plan.effective_h_ref(), T, in.data, in.model, in.hp, in.init, plan.times);

  TestFunction probe =
      activation_probe(in.model, plan.probe_x.empty()
                                     ? std::vector<double>(in.model.input_dim,
                                                           in.model.data_radius / 2)
                                     : plan.probe_x);

  long jobs = static_cast<long>(plan.widths.size()) * plan.trials;
  std::vector<std::vector<TrialRow>> slots(jobs);
  detail::parallel_for(jobs, threads, [&](long job) {
    size_t w = static_cast<size_t>(job) / plan.trials;
    long tr = job % plan.trials;
    slots[job] = run_one_trial(plan, in, res.reference, probe, plan.widths[w], w, tr);
  });

  for (auto& rs : slots) {
    for (const auto& r : rs)
      if (r.status == "failed") ++res.failures;
    res.rows.insert(res.rows.end(), rs.begin(), rs.end());
  }
  res.total_trials = jobs;
  res.invalid = res.failures * 100 > res.total_trials;  // > 1%
  sort_rows(res.rows);
  res.aggregates = aggregate_rows(res.rows);
  return res;
}

// ---------------------------------------------------------------------------
// Studies

struct BiasSweepSummary {
  MetricTrialsResult trials;
  // metric -> time -> fit over widths of the aggregate means
  std::map<std::string, std::map<double, SlopeFit>> slopes;
  bool pass = false;
};

// Pinned verdict windows: testfn and sw1 slopes in [-0.65, -0.35], w1 slope
// <= -0.35 (its rate carries an extra dimension-dependent term, so only the
// upper edge is asserted).
inline constexpr double kSlopeLo = -0.65;
inline constexpr double kSlopeHi = -0.35;

inline BiasSweepSummary run_bias_sweep(const ExperimentPlan& plan, const StudyInputs& in,
                                       int threads = 1) {
  for (long w : plan.widths) {
    Hyperparams hp = in.hp;
    hp.N = w;
    StabilityLedger lg = build_ledger(in.model, hp, in.ledger);
    if (!lg.L_N || !(*lg.L_N < 1.0))
      throw PreconditionError("bias sweep requires L_N < 1 for every width (violated at N = " +
                              std::to_string(w) + ")");
  }
  BiasSweepSummary s;
  s.trials = run_metric_trials(plan, in, threads);
  if (s.trials.invalid) return s;
  std::map<std::string, std::map<double, std::vector<std::pair<double, double>>>> series;
  for (const auto& a : s.trials.aggregates)
    if (a.metric == "testfn" || a.metric == "w1" || a.metric == "sw1")
      series[a.metric][a.t].push_back({static_cast<double>(a.N), a.value});
  bool ok = true;
  for (auto& [metric, by_t] : series) {
    for (auto& [t, pts] : by_t) {
      if (t == 0.0) continue;  // exact zeros by coupling; no slope there
      SlopeFit fit = fit_loglog_slope(pts);
      s.slopes[metric][t] = fit;
      if (metric == "w1")
        ok = ok && fit.slope <= kSlopeHi;
      else
        ok = ok && fit.slope >= kSlopeLo && fit.slope <= kSlopeHi;
    }
  }
  s.pass = ok && !s.slopes.empty();
  return s;
}

struct TimeUniformitySummary {
  MetricTrialsResult trials;
  std::map<double, double> mean_testfn;
  double flatness = 0.0;       // max/min of mean testfn delta over t >= 1
  bool diagnostic_only = false;  // inadmissible ledger: report, no verdict
  bool pass = false;
};

inline TimeUniformitySummary run_time_uniformity(const ExperimentPlan& plan,
                                                 const StudyInputs& in, int threads = 1) {
  TimeUniformitySummary s;
  {
    Hyperparams hp = in.hp;
    hp.N = plan.widths.front();
    StabilityLedger lg = build_ledger(in.model, hp, in.ledger);
    s.diagnostic_only = !lg.admissible_contraction;
  }
  s.trials = run_metric_trials(plan, in, threads);
  if (s.trials.invalid) return s;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& a : s.trials.aggregates) {
    if (a.metric != "testfn") continue;
    s.mean_testfn[a.t] = a.value;
    if (a.t >= 1.0) {
      lo = std::min(lo, a.value);
      hi = std::max(hi, a.value);
    }
  }
  if (std::isfinite(lo) && lo > 0.0) s.flatness = hi / lo;
  s.pass = !s.diagnostic_only && s.flatness > 0.0 && s.flatness <= 2.0;
  return s;
}

struct TailStudySummary {
  MetricTrialsResult trials;
  std::map<long, double> mean, stddev, s_N;  // s_N = stddev * sqrt(N)
  // (N, r, empirical tail, gaussian bound if C_N_2 defined)
  std::vector<std::tuple<long, double, double, std::optional<double>>> table;
  double ratio_lo = 1.0, ratio_hi = 1.0;  // extremes of s_N(w_{i+1}) / s_N(w_i)
  bool pass = false;
};

inline TailStudySummary run_tail_study(const ExperimentPlan& plan, const StudyInputs& in,
                                       int threads = 1) {
  TailStudySummary s;
  s.trials = run_metric_trials(plan, in, threads);
  if (s.trials.invalid) return s;
  double t_meas = plan.times.back();
  std::map<long, std::vector<double>> vals;
  for (const auto& r : s.trials.rows)
    if (r.status == "ok" && r.metric == "testfn" && r.t == t_meas)
      vals[r.N].push_back(r.value);
  for (auto& [N, v] : vals) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= std::max<double>(1.0, static_cast<double>(v.size()) - 1.0);
    s.mean[N] = mean;
    s.stddev[N] = std::sqrt(var);
    s.s_N[N] = std::sqrt(var) * std::sqrt(static_cast<double>(N));
  }
  // Deviation thresholds from the smallest width's scale; shared across N so
  // the rows are comparable. Degenerate (zero-variance) data still probes
  // strictly positive thresholds.
  double base = std::max(s.stddev[plan.widths.front()], 1e-12);
  for (long N : plan.widths) {
    Hyperparams hp = in.hp;
    hp.N = N;
    StabilityLedger lg = build_ledger(in.model, hp, in.ledger);
    for (int j = 1; j <= 8; ++j) {
      double r = j * base / 2.0;
      long count = 0;
      for (double x : vals[N])
        if (std::abs(x - s.mean[N]) >= r) ++count;
      double emp = static_cast<double>(count) / static_cast<double>(vals[N].size());
      std::optional<double> bound;
      if (lg.C_N_2)
        bound = std::min(1.0, 2.0 * std::exp(-r * r * static_cast<double>(N) /
                                             (2.0 * *lg.C_N_2)));
      s.table.push_back({N, r, emp, bound});
    }
  }
  s.ratio_lo = std::numeric_limits<double>::infinity();
  s.ratio_hi = 0.0;
  // Degenerate (zero or non-finite) scales cannot support a verdict, and a
  // single width has no ratios to check.
  bool ratios_ok = plan.widths.size() >= 2;
  for (size_t i = 0; i + 1 < plan.widths.size(); ++i) {
    double ratio = s.s_N[plan.widths[i + 1]] / s.s_N[plan.widths[i]];
    if (!std::isfinite(ratio)) {
      ratios_ok = false;
      continue;
    }
    s.ratio_lo = std::min(s.ratio_lo, ratio);
    s.ratio_hi = std::max(s.ratio_hi, ratio);
  }
  s.pass = ratios_ok && s.ratio_lo >= 0.5 && s.ratio_hi <= 2.0;
  return s;
}

struct LocalizationSummary {
  std::vector<TrialRow> rows;
  double a_inf = 0.0, R_inf = 0.0;
  double worst_norm = 0.0;
  long violations = 0;
  long failures = 0;
  bool pass = false;
};

// SGD-only study: no twins or reference, just the hard-bound audit of every
// particle norm along the chain.
inline LocalizationSummary run_localization_audit(const ExperimentPlan& plan,
                                                  const StudyInputs& in, int threads = 1) {
  auto errs = validate_plan(plan, in);
  if (!errs.empty()) {
    std::string msg = "invalid plan:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  long N = plan.widths.front();
  Hyperparams hp = in.hp;
  hp.N = N;
  // Refuses (naming the inequality) before any simulation runs.
  auto [a_inf, R_inf] = localization_radii(in.model, hp, in.ledger.A, in.ledger.R0);
  LocalizationSummary s;
  s.a_inf = a_inf;
  s.R_inf = R_inf;

  std::vector<std::vector<TrialRow>> slots(plan.trials);
  detail::parallel_for(plan.trials, threads, [&](long tr) {
    uint64_t seed = trial_seed(plan.master_seed, 0, tr);
    Rng rng(seed);
    ParticleMatrix theta = draw_ensemble(in.init, N, rng);
    detail::StepScratch scratch;
    double max_norm = max_particle_norm(theta);
    double t_end = static_cast<double>(plan.steps) / static_cast<double>(N);
    try {
      for (long k = 0; k < plan.steps; ++k) {
        long j = in.data.sample(rng);
        sgd_step_inplace(theta, {in.data.atoms[j].x, in.data.atoms[j].y}, in.model, hp, k,
                         scratch);
        max_norm = std::max(max_norm, max_particle_norm(theta));
      }
      slots[tr].push_back(
          {study_name(plan.study), N, seed, t_end, "max_norm", max_norm, 0.0, "ok"});
    } catch (const DivergenceError& e) {
      slots[tr].push_back({study_name(plan.study), N, seed,
                           static_cast<double>(e.step) / static_cast<double>(N),
                           "divergence", static_cast<double>(e.step), 0.0, "failed"});
    }
  });
  for (auto& rs : slots)
    for (const auto& r : rs) {
      if (r.status == "failed") {
        ++s.failures;
        ++s.violations;  // leaving the guard ball certainly leaves the R_inf ball
      } else {
        s.worst_norm = std::max(s.worst_norm, r.value);
        if (r.value > R_inf + 1e-12) ++s.violations;
      }
      s.rows.push_back(r);
    }
  sort_rows(s.rows);
  s.pass = s.violations == 0;
  return s;
}

// Single-trial smoke run: width = widths[0], trial 0, per-time rows only.
inline std::vector<TrialRow> run_simulate(const ExperimentPlan& plan, const StudyInputs& in) {
  ExperimentPlan p = plan;
  p.study = Study::Simulate;
  auto errs = validate_plan(p, in);
  if (!errs.empty()) {
    std::string msg = "invalid plan:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  double T = 0.0;
  for (double t : p.times) T = std::max(T, t);
  T += 0.5 / static_cast<double>(p.widths.front());  // step-rounding overshoot
  ReferenceTrajectory ref = evolve_reference_summary(
      mix_seed(p.master_seed, kTagReference, 0), p.effective_M_ref(), p.effective_h_ref(), T,
      in.data, in.model, in.hp, in.init, p.times);
  TestFunction probe =
      activation_probe(in.model, p.probe_x.empty()
                                     ? std::vector<double>(in.model.input_dim,
                                                           in.model.data_radius / 2)
                                     : p.probe_x);
  auto rows = run_one_trial(p, in, ref, probe, p.widths.front(), 0, 0);
  sort_rows(rows);
  return rows;
}

}  // namespace mfsgd
