#ifndef QPOST_PRIOR_HPP
#define QPOST_PRIOR_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpost/core.hpp"
#include "qpost/math.hpp"
#include "qpost/rng.hpp"

namespace qpost {

struct H2Constants {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
};

// Spike-and-slab prior: a support-size law {g_s} with per-pattern weight
// pi_delta = g_s / C(d,s), and a Laplace(rho) slab on the active coordinates.
// The beta-binomial law is the marginal of delta_j ~ Ber(q), q ~ Beta(1, d^u);
// it satisfies the H2 ratio bounds with (1/2, 1, u, u-1).
class PriorSpec {
 public:
  enum class LawKind { BetaBinomial, Explicit };

  static PriorSpec beta_binomial(int d, double u, double rho) {
    if (d < 1) throw std::invalid_argument("PriorSpec: d >= 1 required");
    if (u <= 1.0) throw std::invalid_argument("PriorSpec: beta-binomial needs u > 1 (c4 = u-1 > 0)");
    if (rho <= 0.0) throw std::invalid_argument("PriorSpec: rho > 0 required");
    PriorSpec p;
    p.d_ = d;
    p.rho_ = rho;
    p.kind_ = LawKind::BetaBinomial;
    p.u_ = u;
    p.h2_ = H2Constants{0.5, 1.0, u, u - 1.0};
    // log g_s = lchoose(d,s) + lB(1+s, d^u + d - s) - lB(1, d^u), all via lgamma
    // so d up to 1e4 stays finite.
    const double du = std::pow(static_cast<double>(d), u);
    p.log_g_.resize(d + 1);
    const double lb0 = lbeta(1.0, du);
    for (int s = 0; s <= d; ++s)
      p.log_g_[s] = lchoose(d, s) + lbeta(1.0 + s, du + d - s) - lb0;
    return p;
  }

  static PriorSpec explicit_law(int d, std::vector<double> g, double rho,
                                H2Constants claimed = {}) {
    if (d < 1) throw std::invalid_argument("PriorSpec: d >= 1 required");
    if (rho <= 0.0) throw std::invalid_argument("PriorSpec: rho > 0 required");
    if (static_cast<int>(g.size()) > d + 1)
      throw std::invalid_argument("PriorSpec: law has more than d+1 entries");
    g.resize(d + 1, 0.0);
    double total = 0.0;
    for (double gs : g) {
      if (gs < 0.0) throw std::invalid_argument("PriorSpec: g_s >= 0 required");
      total += gs;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("PriorSpec: support law must sum to 1");
    PriorSpec p;
    p.d_ = d;
    p.rho_ = rho;
    p.kind_ = LawKind::Explicit;
    p.h2_ = claimed;
    p.log_g_.resize(d + 1);
    for (int s = 0; s <= d; ++s)
      p.log_g_[s] = g[s] > 0.0 ? std::log(g[s] / total) : -kInf;
    return p;
  }

  int d() const { return d_; }
  double rho() const { return rho_; }
  LawKind law_kind() const { return kind_; }
  double u() const { return u_; }
  const H2Constants& h2() const { return h2_; }

  // log g_s; -inf marks an impossible support size.
  double log_g(int s) const {
    if (s < 0 || s > d_) return -kInf;
    return log_g_[s];
  }

  double log_pattern_weight(int s) const { return log_g(s) - lchoose(d_, s); }

 private:
  int d_ = 0;
  double rho_ = 1.0;
  LawKind kind_ = LawKind::BetaBinomial;
  double u_ = 2.0;
  H2Constants h2_;
  std::vector<double> log_g_;
};

// log pi_delta for one pattern; -inf when g_{|delta|} = 0 (impossible support).
inline double support_log_weight(const PriorSpec& spec, const SparsityPattern& delta) {
  if (delta.dim != spec.d())
    throw std::invalid_argument("support_log_weight: dimension mismatch");
  return spec.log_pattern_weight(delta.size());
}

struct H2Report {
  bool all_pass = true;
  double lower = 0.0, upper = 0.0;     // c1/d^c3 and c2/d^c4
  double min_ratio = kInf, max_ratio = -kInf;  // over s with g_{s-1} > 0
  std::vector<int> failing_s;
};

// Checks g_s / g_{s-1} in [c1 d^{-c3}, c2 d^{-c4}] for s = 1..d against the
// spec's claimed constants. Boundary equality passes (up to 1e-12 relative).
inline H2Report check_h2(const PriorSpec& spec) {
  H2Report rep;
  const int d = spec.d();
  const auto& c = spec.h2();
  rep.lower = c.c1 * std::pow(static_cast<double>(d), -c.c3);
  rep.upper = c.c2 * std::pow(static_cast<double>(d), -c.c4);
  const double eps = 1e-12;
  for (int s = 1; s <= d; ++s) {
    const double lg_prev = spec.log_g(s - 1);
    const double lg = spec.log_g(s);
    bool ok;
    if (lg_prev == -kInf) {
      ok = (lg == -kInf);  // 0 <= 0 <= 0
    } else {
      const double ratio = std::exp(lg - lg_prev);
      rep.min_ratio = std::min(rep.min_ratio, ratio);
      rep.max_ratio = std::max(rep.max_ratio, ratio);
      ok = ratio >= rep.lower * (1.0 - eps) && ratio <= rep.upper * (1.0 + eps);
    }
    if (!ok) {
      rep.all_pass = false;
      rep.failing_s.push_back(s);
    }
  }
  return rep;
}

// log density of theta's own mixture component relative to mu_{d,delta}:
// log pi_delta + |delta| log(rho/2) - rho ||theta||_1.
inline double log_prior_density(const PriorSpec& spec, const SparseParam& theta) {
  if (theta.dim() != spec.d())
    throw std::invalid_argument("log_prior_density: dimension mismatch");
  const SparsityPattern delta = sparsity_pattern(theta);
  const double lw = spec.log_pattern_weight(delta.size());
  if (lw == -kInf) return -kInf;
  return lw + delta.size() * std::log(spec.rho() / 2.0) - spec.rho() * norms(theta).l1;
}

// rho = 4 ||X||_inf sqrt(n log d).
inline double select_rho_logistic(double x_inf, long n, int d) {
  if (d < 2) throw std::invalid_argument("select_rho_logistic: d >= 2 required");
  if (n < 1) throw std::invalid_argument("select_rho_logistic: n >= 1 required");
  if (x_inf <= 0.0) throw std::invalid_argument("select_rho_logistic: x_inf > 0 required");
  return 4.0 * x_inf * std::sqrt(static_cast<double>(n) * std::log(static_cast<double>(d)));
}

// rho = 24 sqrt(n log p).
inline double select_rho_ising(long n, int p) {
  if (p < 2) throw std::invalid_argument("select_rho_ising: p >= 2 required");
  if (n < 1) throw std::invalid_argument("select_rho_ising: n >= 1 required");
  return 24.0 * std::sqrt(static_cast<double>(n) * std::log(static_cast<double>(p)));
}

// Ancestral draw: support size from {g_s}, uniform pattern of that size,
// active values i.i.d. Laplace(rho).
inline SparseParam sample_prior(const PriorSpec& spec, Rng& rng) {
  const int d = spec.d();
  // inverse-CDF on the (finite) size law
  double u = rng.uniform();
  int size = 0;
  double acc = 0.0;
  for (int s = 0; s <= d; ++s) {
    const double g = std::exp(spec.log_g(s));
    acc += g;
    if (u < acc) {
      size = s;
      break;
    }
    if (s == d) size = d;
  }
  // uniform pattern of the chosen size (partial Fisher-Yates)
  std::vector<int> pool(d);
  for (int j = 0; j < d; ++j) pool[j] = j;
  std::vector<int> idx;
  idx.reserve(size);
  for (int k = 0; k < size; ++k) {
    const int pick = k + rng.uniform_int(d - k);
    std::swap(pool[k], pool[pick]);
    idx.push_back(pool[k]);
  }
  std::sort(idx.begin(), idx.end());
  std::vector<double> vals(idx.size());
  for (auto& v : vals) v = rng.laplace(spec.rho());
  return SparseParam(SparsityPattern(d, idx), vals);
}

}  // namespace qpost

#endif  // QPOST_PRIOR_HPP
