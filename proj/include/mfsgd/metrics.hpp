#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mfsgd/activation.hpp"
#include "mfsgd/common.hpp"
#include "mfsgd/rng.hpp"

namespace mfsgd {

// Uniform empirical measure: each row is an atom with weight 1/rows.
using EmpiricalMeasure = ParticleMatrix;

inline double atom_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Test functions

struct TestFunction {
  std::string name;
  double lipschitz_bound = 1.0;
  std::function<double(std::span<const double>)> f;
};

inline TestFunction coordinate_testfn(int j) {
  TestFunction tf;
  tf.name = "coord" + std::to_string(j);
  tf.lipschitz_bound = 1.0;
  tf.f = [j](std::span<const double> w) { return w[j]; };
  return tf;
}

// Normalized activation probe w -> sigma*(w, x) / max(M, 1e-12); 1-Lipschitz
// on the declared domain by construction. The model is captured by reference
// and must outlive the test function.
inline TestFunction activation_probe(const ActivationModel& m, std::vector<double> x) {
  TestFunction tf;
  tf.name = "activation_probe";
  tf.lipschitz_bound = 1.0;
  double scale = std::max(m.M, 1e-12);
  tf.f = [&m, x = std::move(x), scale](std::span<const double> w) {
    return eval(m, w, x) / scale;
  };
  return tf;
}

inline TestFunction custom_testfn(std::string name, double bound,
                                  std::function<double(std::span<const double>)> f) {
  return TestFunction{std::move(name), bound, std::move(f)};
}

// Largest secant ratio |f(w)-f(w')| / |w-w'| over random pairs; used to audit
// declared Lipschitz bounds.
inline double max_secant_ratio(const TestFunction& tf, int dim, double radius, int pairs,
                               uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(dim), wp(dim);
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    for (auto& v : w) v = rng.uniform(-radius, radius);
    for (auto& v : wp) v = rng.uniform(-radius, radius);
    double d = atom_dist(w, wp);
    if (d < 1e-12) continue;
    worst = std::max(worst, std::abs(tf.f(w) - tf.f(wp)) / d);
  }
  return worst;
}

inline double mean_testfn(const EmpiricalMeasure& mu, const TestFunction& tf) {
  if (mu.rows == 0) throw std::invalid_argument("delta_testfn: empty measure");
  double s = 0.0;
  for (long i = 0; i < mu.rows; ++i) s += tf.f(mu.row(i));
  return s / static_cast<double>(mu.rows);
}

// |<f, mu> - <f, nu>|; the measures may have different atom counts.
inline double delta_testfn(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                           const TestFunction& tf) {
  if (mu.cols != nu.cols) throw std::invalid_argument("delta_testfn: dimension mismatch");
  return std::abs(mean_testfn(mu, tf) - mean_testfn(nu, tf));
}

// ---------------------------------------------------------------------------
// Exact W1 between equal-size uniform measures.
//
// Shortest-augmenting-path assignment with dual potentials, O(n^3) time and
// O(n) memory; pairwise distances are computed on demand rather than stored,
// so the cap guards time, not space.

namespace detail {

template <typename Cost>
double solve_assignment(long n, Cost cost) {
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<long> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1, 0);
  for (long i = 1; i <= n; ++i) {
    p[0] = i;
    long j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      long i0 = p[j0], j1 = -1;
      double delta = kInf;
      for (long j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (long j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      long j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (long j = 1; j <= n; ++j) total += cost(p[j] - 1, j - 1);
  return total;
}

}  // namespace detail

inline double w1_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                       long cap = 4096) {
  if (mu.cols != nu.cols) throw std::invalid_argument("w1_exact: dimension mismatch");
  if (mu.rows != nu.rows)
    throw std::invalid_argument("w1_exact: equal atom counts required (" +
                                std::to_string(mu.rows) + " vs " + std::to_string(nu.rows) +
                                ")");
  if (mu.rows == 0) throw std::invalid_argument("w1_exact: empty measure");
  if (mu.rows > cap)
    throw std::invalid_argument("w1_exact: n = " + std::to_string(mu.rows) +
                                " exceeds cap " + std::to_string(cap));
  double total = detail::solve_assignment(
      mu.rows, [&](long i, long j) { return atom_dist(mu.row(i), nu.row(j)); });
  return total / static_cast<double>(mu.rows);
}

// 1-D exact W1 via the sorted (quantile) coupling, O(n log n).
inline double w1_sorted_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.cols != 1 || nu.cols != 1)
    throw std::invalid_argument("w1_sorted_1d: defined for dimension 1 only");
  if (mu.rows != nu.rows)
    throw std::invalid_argument("w1_sorted_1d: equal atom counts required");
  if (mu.rows == 0) throw std::invalid_argument("w1_sorted_1d: empty measure");
  std::vector<double> a(mu.data), b(nu.data);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double w1_sorted_values(std::vector<double>& a, std::vector<double>& b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

struct Sw1Result {
  double estimate = 0.0;
  double std_error = 0.0;
  long n_dirs = 0;
};

// Monte Carlo sliced W1: directions are normalized Gaussians (redrawn on a
// vanishing norm), each one-dimensional transport solved by the sorted
// coupling. Reports the standard error across directions.
inline Sw1Result sw1_montecarlo(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                long n_dirs, uint64_t seed) {
  if (mu.cols != nu.cols) throw std::invalid_argument("sw1: dimension mismatch");
  if (mu.rows != nu.rows) throw std::invalid_argument("sw1: equal atom counts required");
  if (mu.rows == 0) throw std::invalid_argument("sw1: empty measure");
  if (n_dirs < 1) throw std::invalid_argument("sw1: n_dirs must be >= 1");
  Rng rng(seed);
  int d = mu.cols;
  std::vector<double> dir(d), pa(mu.rows), pb(nu.rows);
  double sum = 0.0, sumsq = 0.0;
  for (long k = 0; k < n_dirs; ++k) {
    double nrm2 = 0.0;
    do {
      rng.fill_normal(dir);
      nrm2 = sq_norm(dir);
    } while (nrm2 < 1e-24);
    double inv = 1.0 / std::sqrt(nrm2);
    for (auto& v : dir) v *= inv;
    for (long i = 0; i < mu.rows; ++i) pa[i] = dot(mu.row(i), dir);
    for (long i = 0; i < nu.rows; ++i) pb[i] = dot(nu.row(i), dir);
    double w = w1_sorted_values(pa, pb);
    sum += w;
    sumsq += w * w;
  }
  Sw1Result r;
  r.n_dirs = n_dirs;
  r.estimate = sum / static_cast<double>(n_dirs);
  if (n_dirs > 1) {
    double var = (sumsq - sum * sum / static_cast<double>(n_dirs)) /
                 static_cast<double>(n_dirs - 1);
    r.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(n_dirs));
  }
  return r;
}

// Kantorovich-Rubinstein dual lower bound over a finite family of test
// functions with declared Lipschitz bound <= 1. Empty family -> 0.
inline double kr_dual_lower_bound(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                  std::span<const TestFunction> family) {
  double best = 0.0;
  for (const auto& tf : family) {
    if (tf.lipschitz_bound > 1.0 + 1e-12)
      throw std::invalid_argument("kr_dual_lower_bound: family member '" + tf.name +
                                  "' declares Lipschitz bound " +
                                  std::to_string(tf.lipschitz_bound) + " > 1");
    best = std::max(best, delta_testfn(mu, nu, tf));
  }
  return best;
}

// Seeded without-replacement subsample of a measure down to k atoms; how
// comparisons against the big reference ensemble are made size-compatible.
inline EmpiricalMeasure subsample_measure(const EmpiricalMeasure& mu, long k, uint64_t seed) {
  if (k > mu.rows)
    throw std::invalid_argument("subsample_measure: k exceeds atom count");
  Rng rng(seed);
  auto idx = rng.sample_without_replacement(mu.rows, k);
  EmpiricalMeasure out(k, mu.cols);
  for (long i = 0; i < k; ++i) {
    auto src = mu.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace mfsgd
