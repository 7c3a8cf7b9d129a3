#ifndef QPOST_THEORY_HPP
#define QPOST_THEORY_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpost/core.hpp"
#include "qpost/math.hpp"

namespace qpost {

// Rate function r(x) = tau x^2 / (1 + b x); b = 0 gives the quadratic case.
// Strictly increasing on [0,inf), r(0) = 0, r(x)/x -> 0 as x -> 0.
struct RateFunction {
  double tau = 1.0;
  double b = 0.0;

  RateFunction() = default;
  RateFunction(double tau_, double b_) : tau(tau_), b(b_) {
    if (tau <= 0.0 || b < 0.0)
      throw std::invalid_argument("RateFunction: tau > 0, b >= 0 required");
  }
  static RateFunction quadratic(double tau_) { return RateFunction(tau_, 0.0); }

  double operator()(double x) const { return tau * x * x / (1.0 + b * x); }
};

inline double rate_eval(const RateFunction& r, double x) {
  if (x < 0.0) throw std::invalid_argument("rate_eval: x >= 0 required");
  return r(x);
}

// phi_r(a) = inf{x > 0 : r(z) >= a z for all z >= x}, inf(empty) = +inf.
// For this family r(z)/z = tau z/(1+bz) increases to tau/b, so the closed form
// is a/(tau - ab) when tau > ab, 0 at a = 0, +inf otherwise.
inline double phi_r(const RateFunction& r, double a) {
  if (a < 0.0) throw std::invalid_argument("phi_r: a >= 0 required");
  if (a == 0.0) return 0.0;
  if (r.tau > a * r.b) return a / (r.tau - a * r.b);
  return kInf;
}

struct RateShiftInfimum {
  double exact_inf = 0.0;   // inf_{x>0} [r(x) - c x]
  double paper_bound = 0.0; // -c^2 / (2 tau)
  bool bound_valid = false; // tau >= (4/3) b c
};

// When the bound is valid (tau >= (4/3) b c) the exact infimum must dominate
// -c^2/(2 tau). If tau/b <= c (b > 0) the shifted function decreases forever;
// the infimum is -inf and the bound condition cannot hold.
inline RateShiftInfimum rate_shift_infimum(const RateFunction& r, double c) {
  if (c < 0.0) throw std::invalid_argument("rate_shift_infimum: c >= 0 required");
  RateShiftInfimum out;
  out.paper_bound = -c * c / (2.0 * r.tau);
  out.bound_valid = r.tau >= (4.0 / 3.0) * r.b * c;
  if (c == 0.0) {
    out.exact_inf = 0.0;
    return out;
  }
  const auto f = [&](double x) { return r(x) - c * x; };
  if (r.b == 0.0) {
    out.exact_inf = -c * c / (4.0 * r.tau);  // quadratic: minimum at c/(2 tau)
    return out;
  }
  if (r.tau <= c * r.b) {
    out.exact_inf = -kInf;
    return out;
  }
  // stationary point of f: tau x (2 + b x) = c (1 + b x)^2, a quadratic in x
  const double A = r.b * (r.tau - c * r.b);
  const double B = 2.0 * (r.tau - c * r.b);
  const double C = -c;
  const double xstar = (-B + std::sqrt(B * B - 4.0 * A * C)) / (2.0 * A);
  out.exact_inf = golden_section_min(f, 0.0, 2.0 * xstar + 1.0);
  return out;
}

struct MillsRatio {
  double value = 0.0;   // (1 - Phi(z)) / phi(z)
  double lower1 = 0.0;  // z / (1 + z^2)
  double lower2 = 0.0;  // 2 / (z + sqrt(z^2 + 4))
  double upper = 0.0;   // 4 / (3z + sqrt(z^2 + 8))
};

namespace detail {
// Mills ratio for large z via the Laplace continued fraction
// 1/(z + 1/(z + 2/(z + 3/(...)))), evaluated backwards.
inline double mills_cf(double z, int depth = 300) {
  double cf = 0.0;
  for (int k = depth; k >= 1; --k) cf = static_cast<double>(k) / (z + cf);
  return 1.0 / (z + cf);
}
}  // namespace detail

inline MillsRatio mills_ratio(double z) {
  if (z < 0.0) throw std::invalid_argument("mills_ratio: z >= 0 required");
  MillsRatio m;
  if (z < 12.0) {
    m.value = normal_sf(z) / normal_pdf(z);
  } else {
    m.value = detail::mills_cf(z);  // erfc underflows long before z ~ 40
  }
  m.lower1 = z / (1.0 + z * z);
  m.lower2 = 2.0 / (z + std::sqrt(z * z + 4.0));
  m.upper = 4.0 / (3.0 * z + std::sqrt(z * z + 8.0));
  return m;
}

// int exp(-(a/2) u^2 - b |u|) du = (2/sqrt(a)) (1 - Phi(b/sqrt(a)))/phi(b/sqrt(a)),
// continuous at a = 0 with limit 2/b.
inline double laplace_gauss_integral(double a, double b) {
  if (a < 0.0) throw std::invalid_argument("laplace_gauss_integral: a >= 0 required");
  if (b <= 0.0) throw std::invalid_argument("laplace_gauss_integral: b > 0 required");
  if (a == 0.0) return 2.0 / b;
  const double sa = std::sqrt(a);
  return (2.0 / sa) * mills_ratio(b / sa).value;
}

struct SelfConcordance {
  double lower = 0.0;  // g''(x0) (e^{-|u|} + |u| - 1)
  double mid = 0.0;    // g(x0+u) - g(x0) - g'(x0) u
  double upper = 0.0;  // g''(x0) (e^{|u|} - |u| - 1)
};

inline SelfConcordance self_concordance_bounds(double x0, double u) {
  SelfConcordance s;
  const double s0 = sigmoid(x0);
  const double g2 = s0 * sigmoid(-x0);  // 1 - sigmoid(x0) cancels for large x0
  const double au = std::abs(u);
  s.lower = g2 * (std::expm1(-au) + au);
  s.upper = g2 * (std::expm1(au) - au);
  // g(x0+u) - g(x0) = log1p(sigmoid(x0) expm1(u)). The identity avoids the
  // cancellation of the direct log1pexp difference when everything is tiny,
  // but loses accuracy itself once sigmoid(x0) expm1(u) approaches -1 (there
  // the difference of g values is at least log 2, so the direct form is the
  // accurate one).
  if (au < 700.0) {
    const double se = s0 * std::expm1(u);
    if (std::isfinite(se) && se > -0.5) {
      s.mid = std::log1p(se) - s0 * u;
      return s;
    }
  }
  s.mid = log1pexp(x0 + u) - log1pexp(x0) - s0 * u;
  return s;
}

struct HBound {
  double h = 0.0;      // e^{-x} + x - 1
  double bound = 0.0;  // x^2 / (2 + x)
};

inline HBound h_lower_bound(double x) {
  if (x < 0.0) throw std::invalid_argument("h_lower_bound: x >= 0 required");
  HBound r;
  r.h = std::expm1(-x) + x;
  r.bound = x * x / (2.0 + x);
  return r;
}

// Hellinger transform sum q1^alpha q2^{1-alpha} on a finite space.
inline double hellinger_transform(const std::vector<double>& q1,
                                  const std::vector<double>& q2,
                                  double alpha = 0.5) {
  if (q1.size() != q2.size())
    throw std::invalid_argument("hellinger_transform: size mismatch");
  if (alpha <= 0.0 || alpha >= 1.0)
    throw std::invalid_argument("hellinger_transform: alpha in (0,1) required");
  double h = 0.0;
  for (std::size_t i = 0; i < q1.size(); ++i) {
    if (q1[i] < 0.0 || q2[i] < 0.0)
      throw std::invalid_argument("hellinger_transform: nonnegative masses required");
    if (q1[i] > 0.0 && q2[i] > 0.0)
      h += std::exp(alpha * std::log(q1[i]) + (1.0 - alpha) * std::log(q2[i]));
  }
  return h;
}

enum class EventKind { E0, E1Check, E1Hat };
enum class Normalization { L1, L2 };

struct EventMargin {
  EventKind kind = EventKind::E0;
  double margin = 0.0;
  double threshold = 0.0;
  bool member = false;
};

// E_{n,0}(Theta, lambda) margin: sup over unit-norm cone directions of
// |<grad, u>|. The paper's part-1 proof reads the unnamed norm as the l1/linf
// dual pairing (margin = ||grad||_inf); part-2 applications read it as l2.
// Both normalizations are supported; unsupported cone/norm pairs throw.
inline EventMargin event_margin_e0(const Eigen::VectorXd& grad, const ConeSpec& cone,
                                   Normalization norm, double lambda) {
  if (lambda <= 0.0) throw std::invalid_argument("event_margin_e0: lambda > 0 required");
  if (grad.size() != cone.dim)
    throw std::invalid_argument("event_margin_e0: dimension mismatch");
  double margin = 0.0;
  const bool full = cone.kind == ConeSpec::Kind::FullSpace;
  const bool ssparse = cone.kind == ConeSpec::Kind::SSparse;
  if (norm == Normalization::L1 && (full || ssparse)) {
    margin = grad.lpNorm<Eigen::Infinity>();
  } else if (norm == Normalization::L2 && full) {
    margin = grad.norm();
  } else if (norm == Normalization::L2 && ssparse) {
    std::vector<double> sq(grad.size());
    for (int j = 0; j < grad.size(); ++j) sq[j] = grad[j] * grad[j];
    std::sort(sq.begin(), sq.end(), std::greater<double>());
    double acc = 0.0;
    for (int k = 0; k < cone.s && k < static_cast<int>(sq.size()); ++k) acc += sq[k];
    margin = std::sqrt(acc);
  } else {
    throw std::invalid_argument(
        "event_margin_e0: supported pairs are full-space/l1, full-space/l2, "
        "s-sparse/l1, s-sparse/l2");
  }
  EventMargin em;
  em.kind = EventKind::E0;
  em.margin = margin;
  em.threshold = lambda / 2.0;
  em.member = margin <= em.threshold;
  return em;
}

// E1-check margin for one parameter: member iff L <= -(1/2) r(dist).
inline EventMargin event_margin_e1_check(double bregman, const RateFunction& r, double dist) {
  EventMargin em;
  em.kind = EventKind::E1Check;
  em.margin = bregman;
  em.threshold = -0.5 * r(dist);
  em.member = bregman <= em.threshold;
  return em;
}

// E1-hat margin for one parameter: member iff L >= -(L_bar/2) dist^2.
inline EventMargin event_margin_e1_hat(double bregman, double L_bar, double dist) {
  EventMargin em;
  em.kind = EventKind::E1Hat;
  em.margin = bregman;
  em.threshold = -0.5 * L_bar * dist * dist;
  em.member = bregman >= em.threshold;
  return em;
}

// log of the packing cap C(d,s) 24^s; uniform in j over the theorem's shells.
inline double packing_bound_log(int d, int s) {
  if (s < 0 || s > d) throw std::invalid_argument("packing_bound_log: 0 <= s <= d required");
  return lchoose(d, s) + s * std::log(24.0);
}

struct Thm2Part1 {
  double log_bound = 0.0;
  double a = 0.0;             // the exponent a (0 when the N cone is empty)
  bool hypothesis_ok = true;  // d^{c4} >= 8 c2
};

// log of 2 e^a (4 + 4 Lbar/rho^2)^{s*} C(d,s*) (4 c2 / d^{c4})^k with
// a = -(1/2) inf_{x>0} [r(x) - 4 rho sqrt(s*) x]. Out-of-regime inputs are
// flagged but still evaluated.
inline Thm2Part1 thm2_part1_rhs(int k, int s_star, int d, double rho, double L_bar,
                                const RateFunction& r, double c2, double c4,
                                bool n_empty) {
  if (k < 0 || s_star < 0 || d < 1)
    throw std::invalid_argument("thm2_part1_rhs: bad k/s*/d");
  if (rho <= 0.0 || L_bar < 0.0 || c2 <= 0.0 || c4 <= 0.0)
    throw std::invalid_argument("thm2_part1_rhs: rho > 0, L_bar >= 0, c2,c4 > 0 required");
  Thm2Part1 out;
  out.hypothesis_ok = std::pow(static_cast<double>(d), c4) >= 8.0 * c2;
  if (n_empty || s_star == 0) {
    out.a = 0.0;
  } else {
    const double c = 4.0 * rho * std::sqrt(static_cast<double>(s_star));
    out.a = -0.5 * rate_shift_infimum(r, c).exact_inf;
  }
  out.log_bound = std::log(2.0) + out.a +
                  s_star * std::log(4.0 + 4.0 * L_bar / (rho * rho)) +
                  lchoose(d, s_star) +
                  k * (std::log(4.0 * c2) - c4 * std::log(static_cast<double>(d)));
  return out;
}

struct Thm2Part2 {
  double log_series1 = -kInf;  // sum_j D_j e^{-r(j M0 eps/2)/8}, D_j <= packing cap
  double log_series2 = -kInf;  // prior-mass series with the e^{3 rho c0 j M0 eps} factor
  bool tail1_reliable = true;  // terms decreasing at j_max
  bool tail2_reliable = true;
  int j_max = 0;
};

// Log-scale partial sums of the two series in the part-2 bound. D_j is
// replaced by its uniform packing cap (pass packing_bound_log(d, s_bar)).
inline Thm2Part2 thm2_part2_terms(double M0, double eps_bar, const RateFunction& r,
                                  double rho, double c0, int s_star, int d,
                                  double c1, double c3, double L_bar,
                                  int j_max, double log_packing_cap) {
  if (M0 <= 2.0) throw std::invalid_argument("thm2_part2_terms: M0 > 2 required");
  if (!(eps_bar > 0.0) || !std::isfinite(eps_bar))
    throw std::invalid_argument("thm2_part2_terms: finite eps_bar > 0 required");
  if (j_max < 1) throw std::invalid_argument("thm2_part2_terms: j_max >= 1 required");
  if (rho <= 0.0 || c0 < 0.0 || c1 <= 0.0 || L_bar <= 0.0)
    throw std::invalid_argument("thm2_part2_terms: bad rho/c0/c1/L_bar");
  Thm2Part2 out;
  out.j_max = j_max;
  OnlineLogSumExp s1, s2;
  double prev1 = kInf, prev2 = kInf;
  for (int j = 1; j <= j_max; ++j) {
    const double x = j * M0 * eps_bar / 2.0;
    const double decay = -r(x) / 8.0;
    const double t1 = log_packing_cap + decay;
    const double t2 = decay + 3.0 * rho * c0 * j * M0 * eps_bar;
    s1.add(t1);
    s2.add(t2);
    if (j == j_max) {
      out.tail1_reliable = t1 < prev1;
      out.tail2_reliable = t2 < prev2;
    }
    prev1 = t1;
    prev2 = t2;
  }
  const double log_prior_factor =
      std::log(2.0) + lchoose(d, s_star) +
      s_star * (c3 * std::log(static_cast<double>(d)) - std::log(c1)) +
      s_star * std::log1p(rho * rho / L_bar);
  out.log_series1 = s1.value();
  out.log_series2 = log_prior_factor + s2.value();
  return out;
}

}  // namespace qpost

#endif  // QPOST_THEORY_HPP
