#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfsgd {

// Thrown when declared preconditions fail (the message names the violated
// inequality, e.g. "lambda > M*c").
class PreconditionError : public std::runtime_error {
 public:
  explicit PreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

// A particle left the guard ball (norm above kDivergenceGuard); carries the
// 1-based step index at which it happened.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long step, double norm)
      : std::runtime_error("particle norm " + std::to_string(norm) +
                           " exceeded divergence guard at step " + std::to_string(step)),
        step(step), norm(norm) {}
  long step;
  double norm;
};

// Configuration-level failures (bad run description, missing reference data).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr double kDivergenceGuard = 1e12;

// Row-major particles-by-dimension buffer. Used both for parameter ensembles
// and for empirical measures (rows = atoms).
struct ParticleMatrix {
  long rows = 0;
  int cols = 0;
  std::vector<double> data;

  ParticleMatrix() = default;
  ParticleMatrix(long n, int d) : rows(n), cols(d), data(static_cast<size_t>(n) * d, 0.0) {}

  std::span<double> row(long i) { return {data.data() + i * cols, static_cast<size_t>(cols)}; }
  std::span<const double> row(long i) const {
    return {data.data() + i * cols, static_cast<size_t>(cols)};
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double sq_norm(std::span<const double> a) { return dot(a, a); }

// Product norms over the ensemble: per-particle Euclidean norm, then the
// p-norm (p = 1 or 2) across particles.
inline double ensemble_norm(const ParticleMatrix& m, int p) {
  double acc = 0.0;
  for (long i = 0; i < m.rows; ++i) {
    double r = norm2(m.row(i));
    acc += (p == 1) ? r : r * r;
  }
  return (p == 1) ? acc : std::sqrt(acc);
}

inline double ensemble_dist(const ParticleMatrix& a, const ParticleMatrix& b, int p) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("ensemble_dist: shape mismatch");
  double acc = 0.0;
  std::vector<double> diff(a.cols);
  for (long i = 0; i < a.rows; ++i) {
    auto ra = a.row(i);
    auto rb = b.row(i);
    double s = 0.0;
    for (int d = 0; d < a.cols; ++d) {
      double t = ra[d] - rb[d];
      s += t * t;
    }
    double r = std::sqrt(s);
    acc += (p == 1) ? r : r * r;
  }
  return (p == 1) ? acc : std::sqrt(acc);
}

inline double max_particle_norm(const ParticleMatrix& m) {
  double mx = 0.0;
  for (long i = 0; i < m.rows; ++i) mx = std::max(mx, norm2(m.row(i)));
  return mx;
}

}  // namespace mfsgd
