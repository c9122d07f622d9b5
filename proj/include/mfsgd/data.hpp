#pragma once

#include <limits>
#include <string>
#include <vector>

#include "mfsgd/common.hpp"
#include "mfsgd/rng.hpp"

namespace mfsgd {

struct DataAtom {
  std::vector<double> x;
  double y = 0.0;
  double p = 0.0;
};

// Finitely supported data law pi = sum_j p_j * delta_{(x_j, y_j)}. All
// mean-field expectations over pi are exact finite sums.
struct DiscreteDataDistribution {
  std::vector<DataAtom> atoms;

  // Inverse-CDF draw over the atom weights; one uniform01 per call, same
  // consumption as Rng::categorical.
  long sample(Rng& rng) const {
    double u = rng.uniform01();
    double acc = 0.0;
    for (size_t j = 0; j + 1 < atoms.size(); ++j) {
      acc += atoms[j].p;
      if (u < acc) return static_cast<long>(j);
    }
    return static_cast<long>(atoms.size()) - 1;
  }

  int input_dim() const { return atoms.empty() ? 0 : static_cast<int>(atoms[0].x.size()); }

  // Validation against the declared label bound A and input radius; returns
  // every violation, one message per finding.
  std::vector<std::string> validate(double A, double data_radius) const {
    std::vector<std::string> errs;
    if (atoms.empty()) {
      errs.push_back("data.atoms: empty support");
      return errs;
    }
    double sum = 0.0;
    size_t dim = atoms[0].x.size();
    for (size_t j = 0; j < atoms.size(); ++j) {
      const auto& a = atoms[j];
      sum += a.p;
      if (a.p <= 0.0)
        errs.push_back("data.atoms[" + std::to_string(j) + "].p: must be positive");
      if (a.x.size() != dim)
        errs.push_back("data.atoms[" + std::to_string(j) + "].x: inconsistent dimension");
      if (std::abs(a.y) > A)
        errs.push_back("data.atoms[" + std::to_string(j) + "].y: |y| = " +
                       std::to_string(std::abs(a.y)) + " exceeds declared A = " +
                       std::to_string(A));
      if (norm2(a.x) > data_radius)
        errs.push_back("data.atoms[" + std::to_string(j) + "].x: |x| = " +
                       std::to_string(norm2(a.x)) + " exceeds data_radius = " +
                       std::to_string(data_radius));
    }
    if (std::abs(sum - 1.0) > 1e-12)
      errs.push_back("data.atoms[*].p: weights sum to " + std::to_string(sum) +
                     ", expected 1 within 1e-12");
    return errs;
  }
};

// Initial particle law mu_0.
struct InitialDistribution {
  enum class Kind { UniformBall, Sphere, Gaussian, Point };
  Kind kind = Kind::UniformBall;
  int dim = 1;
  double radius = 1.0;  // ball / sphere radius, or gaussian sigma
  std::vector<double> point;

  void sample(Rng& rng, std::span<double> out) const {
    switch (kind) {
      case Kind::UniformBall: {
        if (dim == 1) {
          out[0] = rng.uniform(-radius, radius);
          return;
        }
        // Gaussian direction, radial inverse-CDF.
        rng.fill_normal(out);
        double n = norm2({out.data(), out.size()});
        if (n < 1e-300) n = 1e-300;
        double r = radius * std::pow(rng.uniform01(), 1.0 / dim);
        for (auto& v : out) v *= r / n;
        return;
      }
      case Kind::Sphere: {
        if (dim == 1) {
          out[0] = rng.uniform01() < 0.5 ? -radius : radius;
          return;
        }
        rng.fill_normal(out);
        double n = norm2({out.data(), out.size()});
        if (n < 1e-300) n = 1e-300;
        for (auto& v : out) v *= radius / n;
        return;
      }
      case Kind::Gaussian:
        for (auto& v : out) v = radius * rng.normal();
        return;
      case Kind::Point:
        for (size_t i = 0; i < out.size(); ++i) out[i] = point[i];
        return;
    }
  }

  // Exact E|theta_0|^2, used by the moment audit.
  double second_moment() const {
    switch (kind) {
      case Kind::UniformBall:
        return radius * radius * dim / (dim + 2.0);
      case Kind::Sphere:
        return radius * radius;
      case Kind::Gaussian:
        return radius * radius * dim;
      case Kind::Point: {
        double s = 0.0;
        for (double v : point) s += v * v;
        return s;
      }
    }
    return 0.0;
  }

  // Support radius when compact (ball/sphere/point); used as the default R0.
  double support_radius() const {
    switch (kind) {
      case Kind::UniformBall:
      case Kind::Sphere:
        return radius;
      case Kind::Point:
        return norm2({point.data(), point.size()});
      case Kind::Gaussian:
        return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }
};

inline ParticleMatrix draw_ensemble(const InitialDistribution& init, long n, Rng& rng) {
  ParticleMatrix m(n, init.dim);
  for (long i = 0; i < n; ++i) init.sample(rng, m.row(i));
  return m;
}

}  // namespace mfsgd
