#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mfsgd/metrics.hpp"

namespace mfsgd {
namespace {

ParticleMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  ParticleMatrix m(static_cast<long>(rows.size()), static_cast<int>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  return m;
}

ParticleMatrix random_measure(Rng& rng, long n, int d, double radius) {
  ParticleMatrix m(n, d);
  for (auto& v : m.data) v = rng.uniform(-radius, radius);
  return m;
}

// Independent oracle: minimum mean assignment cost by exhaustive permutation
// enumeration; exact for n <= 8.
double w1_bruteforce(const ParticleMatrix& mu, const ParticleMatrix& nu) {
  std::vector<long> perm(mu.rows);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (long i = 0; i < mu.rows; ++i) total += atom_dist(mu.row(i), nu.row(perm[i]));
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(mu.rows);
}

TEST(Metrics, DeltaTestfnHandlesUnequalSizes) {
  auto mu = from_rows({{0.0}, {2.0}});
  auto nu = from_rows({{1.0}});
  EXPECT_EQ(delta_testfn(mu, nu, coordinate_testfn(0)), 0.0);  // means 1 and 1
  auto nu2 = from_rows({{3.0}});
  EXPECT_EQ(delta_testfn(mu, nu2, coordinate_testfn(0)), 2.0);
  auto bad = from_rows({{1.0, 1.0}});
  EXPECT_THROW(delta_testfn(mu, bad, coordinate_testfn(0)), std::invalid_argument);
  EXPECT_THROW(mean_testfn(ParticleMatrix(0, 1), coordinate_testfn(0)),
               std::invalid_argument);
}

TEST(Metrics, W1ExactPinnedExamples) {
  // two-point example where the cheap pairing is forced
  auto mu = from_rows({{0.0}, {2.0}});
  auto nu = from_rows({{1.0}, {3.0}});
  EXPECT_NEAR(w1_exact(mu, nu), 1.0, 1e-15);  // (|0-1| + |2-3|) / 2
  // D = 2 translation by one unit: optimal plan moves every atom by 1
  auto mu2 = from_rows({{0.0, 0.0}, {0.0, 1.0}});
  auto nu2 = from_rows({{1.0, 0.0}, {1.0, 1.0}});
  EXPECT_NEAR(w1_exact(mu2, nu2), 1.0, 1e-15);
  // crossing example: identity pairing costs 2, optimal swap costs 1
  auto mu3 = from_rows({{0.0}, {2.0}});
  auto nu3 = from_rows({{3.0}, {1.0}});
  EXPECT_NEAR(w1_exact(mu3, nu3), 1.0, 1e-15);
}

TEST(Metrics, W1ExactMatchesBruteForce) {
  Rng rng(404);
  for (int k = 0; k < 100; ++k) {
    int d = 1 + static_cast<int>(rng.index(3));
    long n = 2 + rng.index(6);  // 2..7
    auto mu = random_measure(rng, n, d, 2.0);
    auto nu = random_measure(rng, n, d, 2.0);
    double exact = w1_exact(mu, nu);
    double brute = w1_bruteforce(mu, nu);
    EXPECT_NEAR(exact, brute, 1e-9) << "instance " << k << " (n=" << n << ", d=" << d << ")";
  }
}

TEST(Metrics, SortedW1PinnedAndMatchesExact) {
  auto mu = from_rows({{5.0}});
  auto nu = from_rows({{-5.0}});
  EXPECT_EQ(w1_sorted_1d(mu, nu), 10.0);
  Rng rng(405);
  for (int k = 0; k < 500; ++k) {
    long n = 1 + rng.index(40);
    auto a = random_measure(rng, n, 1, 3.0);
    auto b = random_measure(rng, n, 1, 3.0);
    EXPECT_NEAR(w1_sorted_1d(a, b), w1_exact(a, b), 1e-9);
  }
}

TEST(Metrics, W1MetricAxioms) {
  Rng rng(406);
  for (int k = 0; k < 50; ++k) {
    int d = 1 + static_cast<int>(rng.index(3));
    long n = 2 + rng.index(8);
    auto mu = random_measure(rng, n, d, 2.0);
    auto nu = random_measure(rng, n, d, 2.0);
    auto rho = random_measure(rng, n, d, 2.0);
    EXPECT_NEAR(w1_exact(mu, nu), w1_exact(nu, mu), 1e-12);
    EXPECT_LE(w1_exact(mu, mu), 1e-15);
    EXPECT_LE(w1_exact(mu, rho), w1_exact(mu, nu) + w1_exact(nu, rho) + 1e-9);
    EXPECT_GE(w1_exact(mu, nu), 0.0);
  }
}

TEST(Metrics, W1InputChecks) {
  auto mu = from_rows({{0.0}, {1.0}});
  auto nu1 = from_rows({{0.0}});
  EXPECT_THROW(w1_exact(mu, nu1), std::invalid_argument);
  EXPECT_THROW(w1_sorted_1d(mu, nu1), std::invalid_argument);
  auto nu2 = from_rows({{0.0, 0.0}, {1.0, 1.0}});
  EXPECT_THROW(w1_exact(mu, nu2), std::invalid_argument);
  EXPECT_THROW(w1_sorted_1d(nu2, nu2), std::invalid_argument);  // D = 2
  EXPECT_THROW(w1_exact(ParticleMatrix(0, 1), ParticleMatrix(0, 1)), std::invalid_argument);
  auto big = ParticleMatrix(10, 1);
  try {
    w1_exact(big, big, 5);
    FAIL() << "expected cap violation";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("cap"), std::string::npos);
  }
  EXPECT_THROW(sw1_montecarlo(mu, nu1, 4, 1), std::invalid_argument);
  EXPECT_THROW(sw1_montecarlo(mu, mu, 0, 1), std::invalid_argument);
}

// E|<g/|g|, e1>| over the 2-D Gaussian direction law, computed by quadrature:
// the normalized direction is uniform on the circle, so the value is
// (1/2pi) Int |cos phi| dphi, integrated piecewise where |cos| is smooth.
double quadrature_mean_abs_cos() {
  auto simpson = [](double a, double b, int n, auto f) {
    double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
  };
  auto f = [](double phi) { return std::abs(std::cos(phi)); };
  const double pi = std::acos(-1.0);
  double total = 0.0;
  for (double a : {0.0, 0.5, 1.0, 1.5})  // quarter-circle pieces, smooth inside
    total += simpson(a * pi, (a + 0.5) * pi, 1024, f);
  return total / (2.0 * pi);
}

TEST(Metrics, SlicedW1PointMassOracle) {
  double oracle = quadrature_mean_abs_cos();
  EXPECT_NEAR(oracle, 2.0 / std::acos(-1.0), 1e-12);  // sanity on the quadrature itself
  // point mass at the origin vs point mass at e1, both with 3 atoms
  auto mu = from_rows({{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}});
  auto nu = from_rows({{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}});
  auto r = sw1_montecarlo(mu, nu, 20000, 777);
  ASSERT_GT(r.std_error, 0.0);
  EXPECT_NEAR(r.estimate, oracle, 4.0 * r.std_error);
  EXPECT_EQ(r.n_dirs, 20000);
}

TEST(Metrics, SlicedW1NeverExceedsW1) {
  Rng rng(407);
  for (int k = 0; k < 100; ++k) {
    int d = 2 + static_cast<int>(rng.index(2));
    long n = 2 + rng.index(10);
    auto mu = random_measure(rng, n, d, 2.0);
    auto nu = random_measure(rng, n, d, 2.0);
    double w1 = w1_exact(mu, nu);
    auto r = sw1_montecarlo(mu, nu, 64, 1000 + k);
    EXPECT_LE(r.estimate, w1 + 3.0 * r.std_error + 1e-12);
  }
}

TEST(Metrics, SlicedW1DeterministicGivenSeed) {
  Rng rng(408);
  auto mu = random_measure(rng, 12, 3, 1.0);
  auto nu = random_measure(rng, 12, 3, 1.0);
  auto a = sw1_montecarlo(mu, nu, 100, 42);
  auto b = sw1_montecarlo(mu, nu, 100, 42);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.std_error, b.std_error);
  auto c = sw1_montecarlo(mu, nu, 100, 43);
  EXPECT_NE(a.estimate, c.estimate);
}

TEST(Metrics, KrDualLowerBound) {
  EXPECT_EQ(kr_dual_lower_bound(from_rows({{0.0}}), from_rows({{1.0}}), {}), 0.0);
  // 1-D Diracs: the coordinate function is the optimal Kantorovich potential
  auto mu = from_rows({{0.25}});
  auto nu = from_rows({{-1.5}});
  std::vector<TestFunction> family;
  family.push_back(coordinate_testfn(0));
  EXPECT_NEAR(kr_dual_lower_bound(mu, nu, family), 1.75, 1e-15);
  EXPECT_NEAR(kr_dual_lower_bound(mu, nu, family), w1_exact(mu, nu), 1e-15);
  // always a lower bound for W1
  Rng rng(409);
  for (int k = 0; k < 50; ++k) {
    auto a = random_measure(rng, 6, 2, 2.0);
    auto b = random_measure(rng, 6, 2, 2.0);
    std::vector<TestFunction> fam;
    fam.push_back(coordinate_testfn(0));
    fam.push_back(coordinate_testfn(1));
    EXPECT_LE(kr_dual_lower_bound(a, b, fam), w1_exact(a, b) + 1e-12);
  }
  // members must declare a Lipschitz bound <= 1
  std::vector<TestFunction> bad;
  bad.push_back(custom_testfn("steep", 1.5, [](std::span<const double> w) { return w[0]; }));
  EXPECT_THROW(kr_dual_lower_bound(mu, nu, bad), std::invalid_argument);
}

TEST(Metrics, ActivationProbeIsOneLipschitz) {
  auto m = make_tanh_dot(2, 1.0, 2.0);
  TestFunction probe = activation_probe(m, {0.5, 0.5});
  EXPECT_LE(max_secant_ratio(probe, 2, 2.0, 20000, 410), 1.0 + 1e-9);
  EXPECT_LE(probe.lipschitz_bound, 1.0);
  auto soft = make_softplus_dot(1, 1.0);
  TestFunction sprobe = activation_probe(soft, {1.0});
  EXPECT_LE(max_secant_ratio(sprobe, 1, 2.0, 20000, 411), 1.0 + 1e-9);
}

TEST(Metrics, SubsampleMeasure) {
  Rng rng(412);
  auto mu = random_measure(rng, 20, 2, 1.0);
  auto sub = subsample_measure(mu, 20, 1);
  // k = rows: a permutation of the original rows
  auto key = [](std::span<const double> r) { return std::make_pair(r[0], r[1]); };
  std::vector<std::pair<double, double>> a, b;
  for (long i = 0; i < 20; ++i) {
    a.push_back(key(mu.row(i)));
    b.push_back(key(sub.row(i)));
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);

  auto s1 = subsample_measure(mu, 7, 5);
  auto s2 = subsample_measure(mu, 7, 5);
  EXPECT_EQ(s1.data, s2.data);  // seeded determinism
  EXPECT_EQ(s1.rows, 7);
  for (long i = 0; i < s1.rows; ++i)
    EXPECT_NE(std::find(a.begin(), a.end(), key(s1.row(i))), a.end());
  EXPECT_THROW(subsample_measure(mu, 21, 1), std::invalid_argument);
}

}  // namespace
}  // namespace mfsgd
