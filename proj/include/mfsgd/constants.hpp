#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "mfsgd/activation.hpp"
#include "mfsgd/common.hpp"

namespace mfsgd {

struct Hyperparams {
  double alpha = 1.0;  // learning-rate scale, gamma = alpha / N
  double lambda = 0.0; // ridge strength
  long N = 1;          // particle count / width
  int D = 1;           // parameter dimension

  double gamma() const { return alpha / static_cast<double>(N); }
};

// User-supplied concentration inputs. C0 / Cpi are the T1/T2 constants of the
// initial law and the data law; for a law supported in a radius-R ball the
// documented default is R^2/4.
struct LedgerInputs {
  double A = 1.0;                 // label bound, |y| <= A
  double C0_1 = 0.25, C0_2 = 0.25;
  double Cpi_1 = 0.25, Cpi_2 = 0.25;
  double R0 = 1.0;                // radius of the initial support
};

enum class MetricKind { TestFn, W1, SW1 };

// Dimension-dependent rate: N^{-1/2} for test functions and sliced W1,
// N^{-1/(1 v D)} + N^{-1/2} for W1.
inline double kappa(long N, int D, MetricKind metric) {
  double half = 1.0 / std::sqrt(static_cast<double>(N));
  if (metric == MetricKind::W1) {
    double ex = 1.0 / static_cast<double>(std::max(1, D));
    return std::pow(static_cast<double>(N), -ex) + half;
  }
  return half;
}

// Invariant radii of the localized regime. Preconditions are named on
// failure: lambda > M*c and gamma*lambda <= 1.
inline std::pair<double, double> localization_radii(const ActivationModel& m,
                                                    const Hyperparams& hp, double A,
                                                    double R0) {
  if (!(hp.lambda > m.M * m.c))
    throw PreconditionError("localization requires lambda > M*c (lambda = " +
                            std::to_string(hp.lambda) + ", M*c = " +
                            std::to_string(m.M * m.c) + ")");
  if (!(hp.gamma() * hp.lambda <= 1.0))
    throw PreconditionError("localization requires gamma*lambda <= 1 (gamma*lambda = " +
                            std::to_string(hp.gamma() * hp.lambda) + ")");
  double a_inf = std::max(R0, m.M * (A + m.b) / (hp.lambda - m.M * m.c));
  double r_inf = std::max(R0, m.M * (A + m.b + m.c * a_inf) / hp.lambda);
  return {a_inf, r_inf};
}

// Every derived stability quantity in one record. Quantities that are
// undefined for the given inputs (e.g. N_star when lambda <= lambda_star) are
// reported as absent, never as NaN.
struct StabilityLedger {
  // echo of the inputs
  double alpha = 0, lambda = 0;
  long N = 1;
  int D = 1;
  double A = 0, R0 = 0, M = 0, L_x = 0, L_theta = 0;
  std::optional<double> B;  // effective bound; b + c*R_inf in the localized regime

  std::optional<double> K;            // data-space Lipschitz scale of the one-step map
  std::optional<double> lambda_star;  // drift Lipschitz threshold
  std::optional<double> L_N;          // parameter-space contraction factor
  std::optional<double> C_star;
  std::optional<long long> N_star;
  std::optional<double> C_N_1, C_N_2;
  double kappa_testfn_sliced = 0;
  double kappa_w1 = 0;
  std::optional<double> a_inf, R_inf;

  bool admissible_contraction = false;  // L_N < 1
  bool admissible_width = false;        // N >= N_star (false when N_star is absent)
  bool admissible_localization = false; // localized regime with lambda > Mc, gamma*lambda <= 1
};

inline StabilityLedger build_ledger(const ActivationModel& m, const Hyperparams& hp,
                                    const LedgerInputs& in) {
  StabilityLedger lg;
  lg.alpha = hp.alpha;
  lg.lambda = hp.lambda;
  lg.N = hp.N;
  lg.D = hp.D;
  lg.A = in.A;
  lg.R0 = in.R0;
  lg.M = m.M;
  lg.L_x = m.L_x;
  lg.L_theta = m.L_theta;
  lg.kappa_testfn_sliced = kappa(hp.N, hp.D, MetricKind::TestFn);
  lg.kappa_w1 = kappa(hp.N, hp.D, MetricKind::W1);

  if (m.regime == Regime::Localized) {
    lg.admissible_localization =
        hp.lambda > m.M * m.c && hp.gamma() * hp.lambda <= 1.0;
    if (lg.admissible_localization) {
      auto [a, r] = localization_radii(m, hp, in.A, in.R0);
      lg.a_inf = a;
      lg.R_inf = r;
      lg.B = m.b + m.c * r;  // envelope on the invariant ball
    }
  } else {
    lg.B = m.B;
  }

  if (!lg.B) return lg;  // B-dependent entries stay absent

  double B = *lg.B;
  double g = hp.gamma();
  lg.K = hp.alpha * ((in.A + B) * m.L_x + m.M * m.M + m.M);
  lg.lambda_star = (in.A + B) * m.L_theta + m.M * m.M;
  lg.L_N = std::abs(1.0 - g * hp.lambda) + g * *lg.lambda_star;
  lg.C_star = 8.0 * std::pow(m.M, 4) +
              4.0 * std::pow(hp.lambda + (in.A + B) * m.L_theta, 2);
  lg.admissible_contraction = *lg.L_N < 1.0;
  if (hp.lambda > *lg.lambda_star) {
    lg.N_star = static_cast<long long>(
        std::ceil(4.0 * hp.alpha * *lg.C_star / (hp.lambda - *lg.lambda_star)));
    lg.admissible_width = hp.N >= *lg.N_star;
  }
  if (lg.admissible_contraction) {
    double LN = *lg.L_N;
    lg.C_N_1 = static_cast<double>(hp.N) * in.C0_1 +
               *lg.K * *lg.K * in.Cpi_1 / (1.0 - LN * LN);
    lg.C_N_2 = std::max(in.C0_2, *lg.K * *lg.K * in.Cpi_2 / static_cast<double>(hp.N)) /
               ((1.0 - LN) * (1.0 - LN));
  }
  return lg;
}

namespace detail {

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string opt_str(const std::optional<double>& v) {
  return v ? fmt_g(*v) : std::string("absent");
}

inline std::string opt_csv(const std::optional<double>& v) {
  return v ? fmt_g(*v) : std::string();
}

}  // namespace detail

inline std::string render_ledger_text(const StabilityLedger& lg) {
  using detail::fmt_g;
  using detail::opt_str;
  std::ostringstream os;
  auto line = [&](const std::string& k, const std::string& v) {
    os << "  " << k;
    for (size_t i = k.size(); i < 26; ++i) os << ' ';
    os << v << '\n';
  };
  os << "stability ledger (alpha=" << fmt_g(lg.alpha) << ", lambda=" << fmt_g(lg.lambda)
     << ", N=" << lg.N << ", D=" << lg.D << ")\n";
  line("A", fmt_g(lg.A));
  line("B (effective)", lg.B ? fmt_g(*lg.B) : "absent");
  line("M", fmt_g(lg.M));
  line("L_x", fmt_g(lg.L_x));
  line("L_theta", fmt_g(lg.L_theta));
  line("R0", fmt_g(lg.R0));
  line("K", opt_str(lg.K));
  line("lambda_star", opt_str(lg.lambda_star));
  line("L_N", opt_str(lg.L_N));
  line("C_star", opt_str(lg.C_star));
  line("N_star", lg.N_star ? std::to_string(*lg.N_star) : "absent");
  line("C_N_1", opt_str(lg.C_N_1));
  line("C_N_2", opt_str(lg.C_N_2));
  line("kappa_N (testfn, SW1)", fmt_g(lg.kappa_testfn_sliced));
  line("kappa_N (W1)", fmt_g(lg.kappa_w1));
  line("a_inf", opt_str(lg.a_inf));
  line("R_inf", opt_str(lg.R_inf));
  line("admissible_contraction", lg.admissible_contraction ? "true" : "false");
  line("admissible_width", lg.admissible_width ? "true" : "false");
  line("admissible_localization", lg.admissible_localization ? "true" : "false");
  return os.str();
}

inline std::string ledger_csv_header() {
  return "alpha,lambda,N,D,A,B,M,L_x,L_theta,R0,K,lambda_star,L_N,C_star,N_star,"
         "C_N_1,C_N_2,kappa_testfn_sliced,kappa_w1,a_inf,R_inf,"
         "admissible_contraction,admissible_width,admissible_localization\n";
}

inline std::string ledger_csv_row(const StabilityLedger& lg) {
  using detail::fmt_g;
  using detail::opt_csv;
  std::ostringstream os;
  os << fmt_g(lg.alpha) << ',' << fmt_g(lg.lambda) << ',' << lg.N << ',' << lg.D << ','
     << fmt_g(lg.A) << ',' << opt_csv(lg.B) << ',' << fmt_g(lg.M) << ',' << fmt_g(lg.L_x)
     << ',' << fmt_g(lg.L_theta) << ',' << fmt_g(lg.R0) << ',' << opt_csv(lg.K) << ','
     << opt_csv(lg.lambda_star) << ',' << opt_csv(lg.L_N) << ',' << opt_csv(lg.C_star)
     << ',' << (lg.N_star ? std::to_string(*lg.N_star) : std::string()) << ','
     << opt_csv(lg.C_N_1) << ',' << opt_csv(lg.C_N_2) << ','
     << fmt_g(lg.kappa_testfn_sliced) << ',' << fmt_g(lg.kappa_w1) << ','
     << opt_csv(lg.a_inf) << ',' << opt_csv(lg.R_inf) << ','
     << (lg.admissible_contraction ? "true" : "false") << ','
     << (lg.admissible_width ? "true" : "false") << ','
     << (lg.admissible_localization ? "true" : "false") << '\n';
  return os.str();
}

// One CSV row with header; absent quantities are empty fields.
inline std::string render_ledger_csv(const StabilityLedger& lg) {
  return ledger_csv_header() + ledger_csv_row(lg);
}

}  // namespace mfsgd
