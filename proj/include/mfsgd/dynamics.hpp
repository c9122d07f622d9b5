#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfsgd/activation.hpp"
#include "mfsgd/common.hpp"
#include "mfsgd/constants.hpp"
#include "mfsgd/data.hpp"
#include "mfsgd/rng.hpp"

namespace mfsgd {

struct Sample {
  std::span<const double> x;
  double y = 0.0;
};

// Particle state with its step counter; time = step / N for the SGD chain and
// step * h for Euler grids.
struct ParticleEnsemble {
  ParticleMatrix theta;
  long step = 0;
  double time = 0.0;
};

namespace detail {

struct StepScratch {
  std::vector<double> acts;
  std::vector<double> grad;
};

}  // namespace detail

// One online SGD step on all particles, in place:
//   theta^i <- (1 - gamma*lambda) theta^i + gamma (y - yhat(x)) grad sigma*(theta^i, x),
// gamma = alpha/N, with every particle seeing the same sample. Throws
// DivergenceError when a particle norm passes the guard.
inline void sgd_step_inplace(ParticleMatrix& theta, const Sample& z,
                             const ActivationModel& m, const Hyperparams& hp,
                             long step_index, detail::StepScratch& scratch) {
  if (theta.rows != hp.N)
    throw std::invalid_argument("sgd_step: ensemble has " + std::to_string(theta.rows) +
                                " particles, hyperparams declare N = " + std::to_string(hp.N));
  double gamma = hp.gamma();
  double yhat = network_output(m, theta, z.x, scratch.acts);
  double resid = z.y - yhat;
  double decay = 1.0 - gamma * hp.lambda;
  scratch.grad.resize(theta.cols);
  std::span<double> g(scratch.grad);
  double worst = 0.0;
  for (long i = 0; i < theta.rows; ++i) {
    auto row = theta.row(i);
    grad_theta(m, row, z.x, g);
    double sq = 0.0;
    for (int d = 0; d < theta.cols; ++d) {
      row[d] = decay * row[d] + gamma * resid * g[d];
      sq += row[d] * row[d];
    }
    worst = std::max(worst, sq);
  }
  if (!(worst <= kDivergenceGuard * kDivergenceGuard))
    throw DivergenceError(step_index + 1, std::sqrt(worst));
}

inline ParticleEnsemble sgd_step(const ParticleEnsemble& ens, const Sample& z,
                                 const ActivationModel& m, const Hyperparams& hp) {
  ParticleEnsemble out = ens;
  detail::StepScratch scratch;
  sgd_step_inplace(out.theta, z, m, hp, ens.step, scratch);
  out.step = ens.step + 1;
  out.time = static_cast<double>(out.step) / static_cast<double>(hp.N);
  return out;
}

// The stateless one-step map Phi(theta, z); shares the kernel with sgd_step,
// so the two agree bit for bit.
inline ParticleMatrix one_step_map(const ParticleMatrix& theta, const Sample& z,
                                   const ActivationModel& m, const Hyperparams& hp) {
  ParticleMatrix out = theta;
  detail::StepScratch scratch;
  sgd_step_inplace(out, z, m, hp, 0, scratch);
  return out;
}

// ---------------------------------------------------------------------------
// Mean-field drift and the frozen-reference scheme

// <sigma*(., x_j), measure> for every data atom; sorted-order sums, same as
// network_output.
inline std::vector<double> activation_means(const ActivationModel& m,
                                            const ParticleMatrix& measure,
                                            const DiscreteDataDistribution& data) {
  std::vector<double> out(data.atoms.size());
  std::vector<double> scratch;
  for (size_t j = 0; j < data.atoms.size(); ++j)
    out[j] = network_output(m, measure, data.atoms[j].x, scratch);
  return out;
}

// G_lambda(theta, mu) with the interaction term supplied through precomputed
// activation means.
inline void meanfield_drift_means(std::span<const double> theta_i,
                                  std::span<const double> act_means,
                                  const DiscreteDataDistribution& data,
                                  const ActivationModel& m, double lambda,
                                  std::span<double> out, std::span<double> grad_scratch) {
  for (size_t d = 0; d < out.size(); ++d) out[d] = -lambda * theta_i[d];
  for (size_t j = 0; j < data.atoms.size(); ++j) {
    const auto& a = data.atoms[j];
    grad_theta(m, theta_i, a.x, grad_scratch);
    double w = a.p * (a.y - act_means[j]);
    for (size_t d = 0; d < out.size(); ++d) out[d] += w * grad_scratch[d];
  }
}

// G_lambda(theta, mu) = E_pi[(y - <sigma*(.,x), mu>) grad sigma*(theta, x)] - lambda theta,
// an exact finite sum over the data atoms.
inline std::vector<double> meanfield_drift(std::span<const double> theta_i,
                                           const ParticleMatrix& measure,
                                           const DiscreteDataDistribution& data,
                                           const ActivationModel& m, const Hyperparams& hp) {
  std::vector<double> out(theta_i.size()), grad(theta_i.size());
  auto s = activation_means(m, measure, data);
  meanfield_drift_means(theta_i, s, data, m, hp.lambda, out, grad);
  return out;
}

// Frozen-reference approximation of the mean-field law: M_ref particles under
// self-consistent explicit Euler, d theta = alpha G_lambda(theta, mu_t) dt
// with mu_t the ensemble's own empirical law. Stores the activation-mean
// table for every grid time (what the twins consume), the mean squared norm
// (for moment audits), and full snapshots at the requested times.
struct ReferenceTrajectory {
  double h = 0.0;
  double T = 0.0;
  long n_steps = 0;
  long M_ref = 0;
  int dim = 0;
  int natoms = 0;
  std::vector<double> act_means;  // (n_steps+1) x natoms
  std::vector<double> mean_sq;    // n_steps+1
  std::vector<long> snapshot_steps;
  std::vector<ParticleMatrix> snapshots;

  std::span<const double> act_means_at(long g) const {
    return {act_means.data() + g * natoms, static_cast<size_t>(natoms)};
  }

  long nearest_grid(double t) const {
    long g = std::llround(t / h);
    return std::clamp(g, 0L, n_steps);
  }

  const ParticleMatrix& snapshot_at(double t) const {
    long g = nearest_grid(t);
    for (size_t k = 0; k < snapshot_steps.size(); ++k)
      if (snapshot_steps[k] == g) return snapshots[k];
    throw ConfigError("reference snapshot missing for requested time t = " +
                      std::to_string(t));
  }
};

namespace detail {

// Shared Euler stepper; on_grid(g, particles, act_means) fires at every grid
// time, including g = 0 and the endpoint.
template <typename OnGrid>
void integrate_reference(ParticleMatrix& P, double h, long n_steps,
                         const DiscreteDataDistribution& data, const ActivationModel& m,
                         const Hyperparams& hp, OnGrid&& on_grid) {
  std::vector<double> drift(P.cols), grad(P.cols);
  for (long g = 0; g <= n_steps; ++g) {
    auto s = activation_means(m, P, data);
    on_grid(g, P, std::span<const double>(s));
    if (g == n_steps) break;
    double worst = 0.0;
    for (long i = 0; i < P.rows; ++i) {
      auto row = P.row(i);
      meanfield_drift_means(row, s, data, m, hp.lambda, drift, grad);
      double sq = 0.0;
      for (int d = 0; d < P.cols; ++d) {
        row[d] += h * hp.alpha * drift[d];
        sq += row[d] * row[d];
      }
      worst = std::max(worst, sq);
    }
    if (!(worst <= kDivergenceGuard * kDivergenceGuard))
      throw DivergenceError(g + 1, std::sqrt(worst));
  }
}

}  // namespace detail

inline ReferenceTrajectory evolve_reference_summary(
    uint64_t seed, long M_ref, double h, double T, const DiscreteDataDistribution& data,
    const ActivationModel& m, const Hyperparams& hp, const InitialDistribution& init,
    std::span<const double> snapshot_times = {}) {
  ReferenceTrajectory traj;
  traj.h = h;
  traj.T = T;
  traj.n_steps = std::llround(T / h);
  traj.M_ref = M_ref;
  traj.dim = init.dim;
  traj.natoms = static_cast<int>(data.atoms.size());
  traj.act_means.resize(static_cast<size_t>(traj.n_steps + 1) * traj.natoms);
  traj.mean_sq.resize(traj.n_steps + 1);
  for (double t : snapshot_times) traj.snapshot_steps.push_back(traj.nearest_grid(t));
  std::sort(traj.snapshot_steps.begin(), traj.snapshot_steps.end());
  traj.snapshot_steps.erase(
      std::unique(traj.snapshot_steps.begin(), traj.snapshot_steps.end()),
      traj.snapshot_steps.end());

  Rng rng(seed);
  ParticleMatrix P = draw_ensemble(init, M_ref, rng);
  detail::integrate_reference(
      P, h, traj.n_steps, data, m, hp,
      [&](long g, const ParticleMatrix& cur, std::span<const double> s) {
        std::copy(s.begin(), s.end(), traj.act_means.begin() + g * traj.natoms);
        double acc = 0.0;
        for (long i = 0; i < cur.rows; ++i) acc += sq_norm(cur.row(i));
        traj.mean_sq[g] = acc / static_cast<double>(cur.rows);
        if (std::binary_search(traj.snapshot_steps.begin(), traj.snapshot_steps.end(), g))
          traj.snapshots.push_back(cur);
      });
  return traj;
}

// Full-trajectory variant: a snapshot at every grid time. Meant for small
// diagnostic runs; the summary form above is what the experiment drivers use.
inline std::vector<ParticleEnsemble> evolve_reference(
    uint64_t seed, long M_ref, double h, double T, const DiscreteDataDistribution& data,
    const ActivationModel& m, const Hyperparams& hp, const InitialDistribution& init) {
  long n_steps = std::llround(T / h);
  Rng rng(seed);
  ParticleMatrix P = draw_ensemble(init, M_ref, rng);
  std::vector<ParticleEnsemble> out;
  out.reserve(n_steps + 1);
  detail::integrate_reference(
      P, h, n_steps, data, m, hp,
      [&](long g, const ParticleMatrix& cur, std::span<const double>) {
        out.push_back({cur, g, g * h});
      });
  return out;
}

// ---------------------------------------------------------------------------
// Coupled system: SGD ensemble + mean-field twins from the same initial draws

struct CoupledSystem {
  ParticleEnsemble sgd;
  ParticleEnsemble twins;
};

inline CoupledSystem make_coupled(const InitialDistribution& init, long N, Rng& rng) {
  CoupledSystem cs;
  cs.sgd.theta = draw_ensemble(init, N, rng);
  cs.twins.theta = cs.sgd.theta;  // synchronous coupling: identical draws
  return cs;
}

// Euler step of every twin over dt = 1/N against the frozen reference
// activation means; twins never interact with each other or feed back.
inline void twin_step_inplace(ParticleMatrix& twins, std::span<const double> act_means,
                              const DiscreteDataDistribution& data, const ActivationModel& m,
                              const Hyperparams& hp, detail::StepScratch& scratch) {
  double dt = 1.0 / static_cast<double>(hp.N);
  scratch.grad.resize(twins.cols);
  std::vector<double> drift(twins.cols);
  for (long i = 0; i < twins.rows; ++i) {
    auto row = twins.row(i);
    meanfield_drift_means(row, act_means, data, m, hp.lambda, drift, scratch.grad);
    for (int d = 0; d < twins.cols; ++d) row[d] += dt * hp.alpha * drift[d];
  }
}

// Advance the coupled pair by n_steps SGD steps (and the twins by matching
// Euler steps), drawing one shared sample per step from `stream`. `observe`
// fires at the listed step indices (sorted ascending; index 0 means "before
// any step"). Returns the running max particle norm over the whole run, SGD
// and twins both.
template <typename Obs>
double run_coupled(CoupledSystem& cs, long n_steps, const ReferenceTrajectory& ref,
                   const DiscreteDataDistribution& data, const ActivationModel& m,
                   const Hyperparams& hp, Rng& stream,
                   std::span<const long> observe_steps, Obs&& observe) {
  if (n_steps > 0 && ref.n_steps >= 0) {
    double t_end = static_cast<double>(n_steps) / static_cast<double>(hp.N);
    if (t_end > ref.T + 1e-9)
      throw ConfigError("reference trajectory covers T = " + std::to_string(ref.T) +
                        " but the run needs t = " + std::to_string(t_end));
  }
  detail::StepScratch scratch;
  size_t next_obs = 0;
  double max_norm = std::max(max_particle_norm(cs.sgd.theta),
                             max_particle_norm(cs.twins.theta));
  auto maybe_observe = [&](long k) {
    while (next_obs < observe_steps.size() && observe_steps[next_obs] == k) {
      observe(cs, static_cast<double>(k) / static_cast<double>(hp.N));
      ++next_obs;
    }
  };
  maybe_observe(cs.sgd.step);
  for (long k = cs.sgd.step; k < n_steps; ++k) {
    long j = data.sample(stream);
    Sample z{data.atoms[j].x, data.atoms[j].y};
    double t_k = static_cast<double>(k) / static_cast<double>(hp.N);
    sgd_step_inplace(cs.sgd.theta, z, m, hp, k, scratch);
    twin_step_inplace(cs.twins.theta, ref.act_means_at(ref.nearest_grid(t_k)), data, m, hp,
                      scratch);
    cs.sgd.step = cs.twins.step = k + 1;
    cs.sgd.time = cs.twins.time =
        static_cast<double>(k + 1) / static_cast<double>(hp.N);
    max_norm = std::max({max_norm, max_particle_norm(cs.sgd.theta),
                         max_particle_norm(cs.twins.theta)});
    maybe_observe(k + 1);
  }
  return max_norm;
}

// Snapshot-everything variant for small runs and tests.
inline std::vector<CoupledSystem> evolve_coupled(CoupledSystem cs, double T,
                                                 const ReferenceTrajectory& ref,
                                                 const DiscreteDataDistribution& data,
                                                 const ActivationModel& m,
                                                 const Hyperparams& hp, Rng& stream) {
  long n_steps = std::llround(T * static_cast<double>(hp.N));
  std::vector<long> all(n_steps + 1);
  for (long k = 0; k <= n_steps; ++k) all[k] = k;
  std::vector<CoupledSystem> out;
  out.reserve(n_steps + 1);
  run_coupled(cs, n_steps, ref, data, m, hp, stream, all,
              [&](const CoupledSystem& cur, double) { out.push_back(cur); });
  return out;
}

// ---------------------------------------------------------------------------
// Localized-regime audit

struct LocalizationReport {
  double max_norm = 0.0;
  double a_inf = 0.0;
  double R_inf = 0.0;
  bool pass = false;  // reported, never thrown
};

inline LocalizationReport localized_audit_value(double max_norm, const ActivationModel& m,
                                                const Hyperparams& hp, double A, double R0) {
  if (m.regime != Regime::Localized)
    throw PreconditionError("localized_run_audit requires a localized-regime model");
  auto [a, r] = localization_radii(m, hp, A, R0);  // names the violated inequality
  LocalizationReport rep;
  rep.max_norm = max_norm;
  rep.a_inf = a;
  rep.R_inf = r;
  rep.pass = max_norm <= r + 1e-12;
  return rep;
}

inline LocalizationReport localized_run_audit(std::span<const ParticleEnsemble> traj,
                                              const ActivationModel& m, const Hyperparams& hp,
                                              double A, double R0) {
  double worst = 0.0;
  for (const auto& e : traj) worst = std::max(worst, max_particle_norm(e.theta));
  return localized_audit_value(worst, m, hp, A, R0);
}

}  // namespace mfsgd
