#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <string>

#include "mfsgd/common.hpp"
#include "mfsgd/rng.hpp"

namespace mfsgd {

// Bounded: |sigma| <= B with globally bounded gradients.
// Localized: |sigma(theta,x)| <= b + c|theta|, gradient bound M in the
// parameter slot only.
enum class Regime { Bounded, Localized };

enum class ActivationKind { TanhDot, SoftplusDot, Custom };

// A unit activation sigma*(theta, x) together with its self-declared
// regularity constants. The constants are declared relative to the compact
// input ball {|x|_2 <= data_radius} and, for the x-slot bounds of dot-product
// forms, the audit ball {|theta|_2 <= param_radius}; see the factories below.
struct ActivationModel {
  std::string name;
  Regime regime = Regime::Bounded;
  ActivationKind kind = ActivationKind::Custom;
  int theta_dim = 1;  // D
  int input_dim = 1;  // d

  std::optional<double> B;  // uniform bound, Bounded regime only
  double M = 0.0;           // gradient bound (parameter slot; both slots when Bounded)
  double L_x = 0.0;         // Lipschitz constant of grad_theta in x
  double L_theta = 0.0;     // Lipschitz constant of grad_theta in theta
  double b = 0.0;           // localized growth offset
  double c = 0.0;           // localized growth slope
  double data_radius = 1.0;
  double param_radius = 1.0;

  std::function<double(std::span<const double>, std::span<const double>)> custom_eval;
  std::function<void(std::span<const double>, std::span<const double>, std::span<double>)>
      custom_grad_theta;
  std::function<void(std::span<const double>, std::span<const double>, std::span<double>)>
      custom_grad_x;  // optional even for custom models
};

namespace detail {

inline double softplus(double u) {
  return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

inline double sigmoid(double u) {
  return u > 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

inline void check_dims(const ActivationModel& m, std::span<const double> theta,
                       std::span<const double> x) {
  if (static_cast<int>(theta.size()) != m.theta_dim)
    throw std::invalid_argument("activation: theta has dimension " +
                                std::to_string(theta.size()) + ", model declares " +
                                std::to_string(m.theta_dim));
  if (static_cast<int>(x.size()) != m.input_dim)
    throw std::invalid_argument("activation: x has dimension " + std::to_string(x.size()) +
                                ", model declares " + std::to_string(m.input_dim));
}

}  // namespace detail

inline double eval(const ActivationModel& m, std::span<const double> theta,
                   std::span<const double> x) {
  detail::check_dims(m, theta, x);
  switch (m.kind) {
    case ActivationKind::TanhDot:
      return std::tanh(dot(theta, x));
    case ActivationKind::SoftplusDot:
      return detail::softplus(dot(theta, x));
    case ActivationKind::Custom:
      return m.custom_eval(theta, x);
  }
  return 0.0;
}

inline void grad_theta(const ActivationModel& m, std::span<const double> theta,
                       std::span<const double> x, std::span<double> out) {
  detail::check_dims(m, theta, x);
  switch (m.kind) {
    case ActivationKind::TanhDot: {
      double t = std::tanh(dot(theta, x));
      double s2 = 1.0 - t * t;
      for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] * s2;
      return;
    }
    case ActivationKind::SoftplusDot: {
      double s = detail::sigmoid(dot(theta, x));
      for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] * s;
      return;
    }
    case ActivationKind::Custom:
      m.custom_grad_theta(theta, x, out);
      return;
  }
}

// x-slot gradient; defined for the built-ins and for custom models that
// supply one.
inline void grad_x(const ActivationModel& m, std::span<const double> theta,
                   std::span<const double> x, std::span<double> out) {
  detail::check_dims(m, theta, x);
  switch (m.kind) {
    case ActivationKind::TanhDot: {
      double t = std::tanh(dot(theta, x));
      double s2 = 1.0 - t * t;
      for (size_t i = 0; i < out.size(); ++i) out[i] = theta[i] * s2;
      return;
    }
    case ActivationKind::SoftplusDot: {
      double s = detail::sigmoid(dot(theta, x));
      for (size_t i = 0; i < out.size(); ++i) out[i] = theta[i] * s;
      return;
    }
    case ActivationKind::Custom:
      if (!m.custom_grad_x) throw std::invalid_argument("activation: no x-gradient declared");
      m.custom_grad_x(theta, x, out);
      return;
  }
}

// Mean activation over the ensemble. The per-particle values are summed in
// sorted order, so the result does not depend on how the particles are
// indexed; this is what makes the one-step map exactly permutation
// equivariant.
inline double network_output(const ActivationModel& m, const ParticleMatrix& theta,
                             std::span<const double> x, std::vector<double>& scratch) {
  scratch.resize(theta.rows);
  for (long i = 0; i < theta.rows; ++i) scratch[i] = eval(m, theta.row(i), x);
  std::sort(scratch.begin(), scratch.end());
  double s = 0.0;
  for (double v : scratch) s += v;
  return s / static_cast<double>(theta.rows);
}

inline double network_output(const ActivationModel& m, const ParticleMatrix& theta,
                             std::span<const double> x) {
  std::vector<double> scratch;
  return network_output(m, theta, x, scratch);
}

// max over u of 2 sech^2(u)|tanh(u)| = 4/(3*sqrt(3)); the curvature constant
// behind the tanh-dot Lipschitz declarations.
inline constexpr double kTanhCurvature = 0.769800358919501;

// sigma*(theta,x) = tanh(theta.x). Declared on {|x| <= data_radius} with the
// x-slot bounds audited on {|theta| <= param_radius}:
//   |sigma| <= 1, |grad_theta| <= data_radius, |grad_x| <= param_radius,
//   |d(grad_theta)/dtheta| <= kTanhCurvature * data_radius^2,
//   |d(grad_theta)/dx| <= 1 + kTanhCurvature * data_radius * param_radius.
inline ActivationModel make_tanh_dot(int dim, double data_radius, double param_radius = 1.0) {
  ActivationModel m;
  m.name = "tanh-dot";
  m.regime = Regime::Bounded;
  m.kind = ActivationKind::TanhDot;
  m.theta_dim = dim;
  m.input_dim = dim;
  m.B = 1.0;
  m.M = std::max(data_radius, param_radius);
  m.L_theta = kTanhCurvature * data_radius * data_radius;
  m.L_x = 1.0 + kTanhCurvature * data_radius * param_radius;
  m.b = 1.0;  // |sigma| <= 1 works as a localized envelope too
  m.c = 0.0;
  m.data_radius = data_radius;
  m.param_radius = param_radius;
  return m;
}

// sigma*(theta,x) = log(1 + exp(theta.x)). Localized regime:
//   |sigma| <= log 2 + data_radius * |theta|,
//   |grad_theta| <= data_radius (gradient bound in the parameter slot; the
//   x-slot gradient of a dot-product form grows with |theta| and is only
//   audited on the param_radius ball),
//   |d(grad_theta)/dtheta| <= data_radius^2 / 4,
//   |d(grad_theta)/dx| <= 1 + data_radius * param_radius / 4.
inline ActivationModel make_softplus_dot(int dim, double data_radius,
                                         double param_radius = 2.0) {
  ActivationModel m;
  m.name = "softplus-dot";
  m.regime = Regime::Localized;
  m.kind = ActivationKind::SoftplusDot;
  m.theta_dim = dim;
  m.input_dim = dim;
  m.B = std::nullopt;
  m.M = data_radius;
  m.L_theta = data_radius * data_radius / 4.0;
  m.L_x = 1.0 + data_radius * param_radius / 4.0;
  m.b = std::log(2.0);
  m.c = data_radius;
  m.data_radius = data_radius;
  m.param_radius = param_radius;
  return m;
}

// Largest relative error between the analytic theta-gradient and a central
// finite difference over n random points of the declared domain.
inline double max_grad_rel_error(const ActivationModel& m, uint64_t seed, int npoints,
                                 double step = 1e-5) {
  Rng rng(seed);
  std::vector<double> theta(m.theta_dim), x(m.input_dim), g(m.theta_dim), tp(m.theta_dim),
      tm(m.theta_dim);
  double worst = 0.0;
  for (int p = 0; p < npoints; ++p) {
    for (auto& v : theta) v = rng.uniform(-m.param_radius, m.param_radius);
    for (auto& v : x) v = rng.uniform(-m.data_radius / std::sqrt((double)m.input_dim),
                                      m.data_radius / std::sqrt((double)m.input_dim));
    grad_theta(m, theta, x, g);
    for (int d = 0; d < m.theta_dim; ++d) {
      std::copy(theta.begin(), theta.end(), tp.begin());
      std::copy(theta.begin(), theta.end(), tm.begin());
      tp[d] += step;
      tm[d] -= step;
      double fd = (eval(m, tp, x) - eval(m, tm, x)) / (2.0 * step);
      double denom = std::max({std::abs(g[d]), std::abs(fd), 1e-8});
      worst = std::max(worst, std::abs(fd - g[d]) / denom);
    }
  }
  return worst;
}

}  // namespace mfsgd
