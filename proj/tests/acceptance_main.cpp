// Acceptance gate: eleven checks, one verdict line each, nonzero exit if any
// fails. Tolerances and verdict windows are pinned here on purpose; runtimes
// are printed so budget regressions are visible.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "mfsgd/activation.hpp"
#include "mfsgd/constants.hpp"
#include "mfsgd/csv.hpp"
#include "mfsgd/dynamics.hpp"
#include "mfsgd/experiments.hpp"
#include "mfsgd/metrics.hpp"

using namespace mfsgd;

namespace {

std::string strf(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

void ball_point(Rng& rng, std::span<double> v, double radius) {
  size_t D = v.size();
  if (D == 1) {
    v[0] = rng.uniform(-radius, radius);
    return;
  }
  for (auto& u : v) u = rng.normal();
  double n = std::max(norm2(v), 1e-300);
  double r = radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(D));
  for (auto& u : v) u *= r / n;
}

ParticleMatrix random_measure(Rng& rng, long n, int d, double scale) {
  ParticleMatrix m(n, d);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m.row(i)[j] = rng.uniform(-scale, scale);
  return m;
}

double w1_brute(const ParticleMatrix& mu, const ParticleMatrix& nu) {
  std::vector<int> perm(mu.rows);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (long i = 0; i < mu.rows; ++i) cost += atom_dist(mu.row(i), nu.row(perm[i]));
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(mu.rows);
}

// Shared scenario: 1-D bounded model, four data atoms, uniform-ball init.
StudyInputs bounded_inputs(double lambda) {
  StudyInputs in;
  in.model = make_tanh_dot(1, 1.0);
  in.data.atoms = {{{1.0}, -0.8, 0.25},
                   {{-1.0}, -0.2, 0.25},
                   {{0.5}, 0.4, 0.25},
                   {{-0.5}, 0.9, 0.25}};
  in.hp = {1.0, lambda, 16, 1};
  in.init.kind = InitialDistribution::Kind::UniformBall;
  in.init.dim = 1;
  in.init.radius = 1.0;
  return in;
}

StudyInputs localized_inputs(double lambda) {
  StudyInputs in = bounded_inputs(lambda);
  in.model = make_softplus_dot(1, 1.0);
  return in;
}

// --- 1: parameter contraction of the one-step map, p in {1, 2} -------------

Outcome c1_parameter_contraction() {
  struct Case {
    ActivationModel m;
    long N;
  };
  std::vector<Case> cases = {{make_tanh_dot(1, 1.0), 16}, {make_tanh_dot(3, 1.0), 8}};
  double worst = 0.0;
  long checked = 0;
  for (int p : {1, 2}) {
    Rng rng(901 + p);
    for (int k = 0; k < 1000; ++k) {
      const Case& c = cases[k % cases.size()];
      int D = c.m.theta_dim;
      Hyperparams hp{1.0, 4.0, c.N, D};
      StabilityLedger lg = build_ledger(c.m, hp, LedgerInputs{});
      ParticleMatrix a(c.N, D), b(c.N, D);
      for (long i = 0; i < c.N; ++i)
        for (int d = 0; d < D; ++d) {
          a.row(i)[d] = rng.uniform(-1.0, 1.0);  // contraction is global in theta
          b.row(i)[d] = rng.uniform(-1.0, 1.0);
        }
      std::vector<double> x(D);
      ball_point(rng, x, c.m.data_radius);
      Sample z{x, rng.uniform(-1.0, 1.0)};
      double lhs = ensemble_dist(one_step_map(a, z, c.m, hp), one_step_map(b, z, c.m, hp), p);
      double rhs = ensemble_dist(a, b, p);
      if (rhs <= 0.0) continue;
      worst = std::max(worst, lhs / (*lg.L_N * rhs));
      ++checked;
    }
  }
  return {worst <= 1.0 + 1e-12,
          strf("worst lhs/(L_N*rhs) = %.15f over %ld instances", worst, checked)};
}

// --- 2: data sensitivity K/sqrt(N) in l2 (and K in l1) ----------------------

Outcome c2_data_sensitivity() {
  struct Case {
    ActivationModel m;
    long N;
  };
  std::vector<Case> cases = {{make_tanh_dot(1, 1.0), 16}, {make_tanh_dot(3, 1.0), 8}};
  double worst2 = 0.0, worst1 = 0.0;
  Rng rng(904);
  for (int k = 0; k < 1000; ++k) {
    const Case& c = cases[k % cases.size()];
    int D = c.m.theta_dim;
    Hyperparams hp{1.0, 4.0, c.N, D};
    StabilityLedger lg = build_ledger(c.m, hp, LedgerInputs{});
    double K = *lg.K;
    ParticleMatrix th(c.N, D);
    for (long i = 0; i < c.N; ++i) ball_point(rng, th.row(i), c.m.param_radius);
    std::vector<double> x(D), x2(D);
    ball_point(rng, x, c.m.data_radius);
    ball_point(rng, x2, c.m.data_radius);
    double y = rng.uniform(-1.0, 1.0), y2 = rng.uniform(-1.0, 1.0);
    double dz = std::max(atom_dist(x, x2), std::abs(y - y2));
    if (dz < 1e-12) continue;
    ParticleMatrix pa = one_step_map(th, {x, y}, c.m, hp);
    ParticleMatrix pb = one_step_map(th, {x2, y2}, c.m, hp);
    worst2 = std::max(worst2, ensemble_dist(pa, pb, 2) /
                                  (K / std::sqrt(static_cast<double>(c.N)) * dz));
    worst1 = std::max(worst1, ensemble_dist(pa, pb, 1) / (K * dz));
  }
  return {worst2 <= 1.0 + 1e-12 && worst1 <= 1.0 + 1e-12,
          strf("worst l2 ratio %.15f, worst l1 ratio %.15f", worst2, worst1)};
}

// --- 3: exact W1 vs brute force, sorted 1-D vs exact ------------------------

Outcome c3_w1_oracles() {
  Rng rng(333);
  double worst_bf = 0.0;
  for (int k = 0; k < 100; ++k) {
    long n = 2 + static_cast<long>(rng.index(6));  // 2..7
    int d = 1 + static_cast<int>(rng.index(3));
    ParticleMatrix mu = random_measure(rng, n, d, 2.0);
    ParticleMatrix nu = random_measure(rng, n, d, 2.0);
    worst_bf = std::max(worst_bf, std::abs(w1_exact(mu, nu) - w1_brute(mu, nu)));
  }
  double worst_sorted = 0.0;
  for (int k = 0; k < 500; ++k) {
    long n = 2 + static_cast<long>(rng.index(63));  // 2..64
    ParticleMatrix mu = random_measure(rng, n, 1, 3.0);
    ParticleMatrix nu = random_measure(rng, n, 1, 3.0);
    worst_sorted = std::max(worst_sorted, std::abs(w1_exact(mu, nu) - w1_sorted_1d(mu, nu)));
  }
  return {worst_bf <= 1e-9 && worst_sorted <= 1e-9,
          strf("max |exact - brute| = %.2e (100), max |sorted - exact| = %.2e (500)",
               worst_bf, worst_sorted)};
}

// --- 4: sliced W1 two-point closed form 2/pi, and SW1 <= W1 -----------------

Outcome c4_sliced_closed_form() {
  const double kTwoOverPi = 2.0 / std::acos(-1.0);
  ParticleMatrix mu(1, 2), nu(1, 2);
  mu.row(0)[0] = 0.0;
  mu.row(0)[1] = 0.0;
  nu.row(0)[0] = 1.0;
  nu.row(0)[1] = 0.0;
  Sw1Result r = sw1_montecarlo(mu, nu, 100000, 4242);
  bool closed = std::abs(r.estimate - kTwoOverPi) <= 3.0 * r.std_error;

  Rng rng(444);
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 100; ++k) {
    long n = 2 + static_cast<long>(rng.index(31));
    int d = 2 + static_cast<int>(rng.index(2));
    ParticleMatrix a = random_measure(rng, n, d, 2.0);
    ParticleMatrix b = random_measure(rng, n, d, 2.0);
    double w = w1_exact(a, b);
    Sw1Result s = sw1_montecarlo(a, b, 2000, 5000 + static_cast<uint64_t>(k));
    worst_excess = std::max(worst_excess, s.estimate - 3.0 * s.std_error - w);
  }
  return {closed && worst_excess <= 1e-12,
          strf("|est - 2/pi| = %.2e (3 se = %.2e); worst SW1 excess over W1 = %.2e",
               std::abs(r.estimate - kTwoOverPi), 3.0 * r.std_error, worst_excess)};
}

// --- 5: bias decay exponent over widths --------------------------------------

Outcome c5_bias_decay(int threads) {
  StudyInputs in = bounded_inputs(4.0);
  ExperimentPlan plan;
  plan.study = Study::BiasSweep;
  plan.widths = {64, 128, 256, 512, 1024};
  plan.times = {0.0, 4.0};
  plan.trials = 200;
  plan.master_seed = 20250814;
  plan.n_dirs = 8;
  plan.M_ref = 8192;
  plan.h_ref = 1.0 / 1024.0;
  BiasSweepSummary s = run_bias_sweep(plan, in, threads);
  if (s.trials.invalid)
    return {false, strf("study invalid: %ld/%ld trials diverged", s.trials.failures,
                        s.trials.total_trials)};
  double st = s.slopes["testfn"][4.0].slope;
  double sw = s.slopes["w1"][4.0].slope;
  double ss = s.slopes["sw1"][4.0].slope;
  return {s.pass, strf("slopes at t=4: testfn %.3f, w1 %.3f, sw1 %.3f (window [%.2f, %.2f])",
                       st, sw, ss, kSlopeLo, kSlopeHi)};
}

// --- 6: discrepancy flat in time at fixed width ------------------------------

Outcome c6_time_uniformity(int threads) {
  StudyInputs in = bounded_inputs(4.0);
  ExperimentPlan plan;
  plan.study = Study::TimeUniformity;
  plan.widths = {256};
  plan.times = {2.0, 4.0, 8.0, 16.0};
  plan.trials = 200;
  plan.master_seed = 616;
  plan.metric_w1 = plan.metric_sw1 = false;
  TimeUniformitySummary s = run_time_uniformity(plan, in, threads);
  if (s.trials.invalid)
    return {false, strf("study invalid: %ld/%ld trials diverged", s.trials.failures,
                        s.trials.total_trials)};
  return {s.pass && !s.diagnostic_only,
          strf("flatness max/min = %.3f over t in {2,4,8,16} (limit 2)", s.flatness)};
}

// --- 7: fluctuation scale s_N = std * sqrt(N) stable -------------------------

Outcome c7_concentration_scale(int threads) {
  StudyInputs in = bounded_inputs(4.0);
  ExperimentPlan plan;
  plan.study = Study::TailStudy;
  plan.widths = {128, 512};
  plan.times = {4.0};
  plan.trials = 500;
  plan.master_seed = 77;
  plan.metric_w1 = plan.metric_sw1 = false;
  TailStudySummary s = run_tail_study(plan, in, threads);
  if (s.trials.invalid)
    return {false, strf("study invalid: %ld/%ld trials diverged", s.trials.failures,
                        s.trials.total_trials)};
  return {s.pass, strf("s_128 = %.4g, s_512 = %.4g, ratio %.3f (allowed [0.5, 2])",
                       s.s_N[128], s.s_N[512], s.s_N[512] / s.s_N[128])};
}

// --- 8: localized iterates stay inside R_inf --------------------------------

Outcome c8_localization(int threads) {
  StudyInputs in = localized_inputs(2.0);
  ExperimentPlan plan;
  plan.study = Study::LocalizationAudit;
  plan.widths = {32};
  plan.steps = 100000;
  plan.trials = 20;
  plan.master_seed = 88;
  LocalizationSummary s = run_localization_audit(plan, in, threads);
  return {s.pass && s.failures == 0,
          strf("worst particle norm %.6f vs R_inf = %.6f, violations %ld over %ld steps x %ld",
               s.worst_norm, s.R_inf, s.violations, plan.steps, plan.trials)};
}

// --- 9: reference second moment uniformly bounded on the grid ---------------

Outcome c9_moment_bound() {
  StudyInputs in = bounded_inputs(4.0);
  ReferenceTrajectory ref = evolve_reference_summary(991, 2048, 0.01, 4.0, in.data, in.model,
                                                     in.hp, in.init);
  double A = in.ledger.A, B = *in.model.B, M = in.model.M;
  double bound = in.init.second_moment() +
                 1.05 * std::pow((A + B) * M / in.hp.lambda, 2.0);
  double worst = 0.0;
  for (double v : ref.mean_sq) worst = std::max(worst, v);
  return {worst <= bound, strf("max grid E|theta|^2 = %.6f, bound %.6f", worst, bound)};
}

// --- 10: explicit Euler reference is first order in h ------------------------

Outcome c10_integrator_order() {
  StudyInputs in = bounded_inputs(4.0);
  std::vector<double> snap{1.0};
  auto run = [&](double h) {
    return evolve_reference_summary(1010, 256, h, 1.0, in.data, in.model, in.hp, in.init,
                                    snap);
  };
  ReferenceTrajectory ta = run(0.02), tb = run(0.01), tc = run(0.005);
  auto dev = [](const ParticleMatrix& a, const ParticleMatrix& b) {
    double worst = 0.0;
    for (long i = 0; i < a.rows; ++i) worst = std::max(worst, atom_dist(a.row(i), b.row(i)));
    return worst;
  };
  double d1 = dev(ta.snapshot_at(1.0), tb.snapshot_at(1.0));
  double d2 = dev(tb.snapshot_at(1.0), tc.snapshot_at(1.0));
  double ratio = d1 / d2;
  return {ratio >= 1.5 && ratio <= 2.5,
          strf("endpoint deviation ratio dev(h)/dev(h/2) = %.3f (allowed [1.5, 2.5])", ratio)};
}

// --- 11: byte-identical rerun -------------------------------------------------

Outcome c11_determinism(int threads) {
  StudyInputs in = bounded_inputs(4.0);
  ExperimentPlan plan;
  plan.study = Study::BiasSweep;
  plan.widths = {8, 16};
  plan.times = {0.0, 1.0};
  plan.trials = 2;
  plan.master_seed = 1111;
  plan.n_dirs = 4;
  MetricTrialsResult r1 = run_metric_trials(plan, in, threads);
  MetricTrialsResult r2 = run_metric_trials(plan, in, threads);
  bool rows_eq = format_csv(r1.rows) == format_csv(r2.rows);
  bool aggr_eq = format_csv(r1.aggregates) == format_csv(r2.aggregates);
  return {rows_eq && aggr_eq,
          strf("rows %s, aggregates %s (%zu + %zu lines)", rows_eq ? "identical" : "DIFFER",
               aggr_eq ? "identical" : "DIFFER", r1.rows.size(), r1.aggregates.size())};
}

}  // namespace

int main() {
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;

  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> criteria = {
      {"one-step map contracts particles at rate L_N (p=1,2)", c1_parameter_contraction},
      {"one-step map data sensitivity <= K/sqrt(N) (l2), K (l1)", c2_data_sensitivity},
      {"exact W1 = brute-force minimum; sorted 1-D = exact", c3_w1_oracles},
      {"sliced W1 two-point value 2/pi; SW1 <= W1", c4_sliced_closed_form},
      {"bias decay exponent across widths 64..1024", [&] { return c5_bias_decay(threads); }},
      {"discrepancy flat in time at N = 256", [&] { return c6_time_uniformity(threads); }},
      {"fluctuation scale std*sqrt(N) stable (N = 128 vs 512)",
       [&] { return c7_concentration_scale(threads); }},
      {"localized SGD iterates stay inside R_inf", [&] { return c8_localization(threads); }},
      {"reference second moment bounded on the whole grid", c9_moment_bound},
      {"reference integrator first-order in h", c10_integrator_order},
      {"byte-identical rerun from one master seed", [&] { return c11_determinism(threads); }},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].run();
    } catch (const std::exception& e) {
      out = {false, strf("exception: %s", e.what())};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%2zu] %-56s %s  (%s; %.1f s)\n", i + 1, criteria[i].name,
                out.pass ? "PASS" : "FAIL", out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  if (failures == 0)
    std::printf("acceptance: all %zu criteria passed\n", criteria.size());
  else
    std::printf("acceptance: %d of %zu criteria FAILED\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
