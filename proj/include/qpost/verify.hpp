#ifndef QPOST_VERIFY_HPP
#define QPOST_VERIFY_HPP

#include <cstdio>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "qpost/oracle.hpp"
#include "qpost/sampler.hpp"
#include "qpost/theory.hpp"

namespace qpost {

using json = nlohmann::json;

namespace detail {
struct VerifyCheck {
  std::string name;
  std::function<bool(std::string&)> run;  // fills a one-line detail
};
}  // namespace detail

// Runtime re-execution of the library's core invariants, one PASS/FAIL line
// per check. `quick` trims the Monte Carlo sizes for smoke runs.
inline bool run_verify_suite(std::uint64_t seed, bool quick, json* report_out) {
  using detail::VerifyCheck;
  std::vector<VerifyCheck> checks;
  const long mc = quick ? 1000 : 10000;

  checks.push_back({"mills-ratio-chain", [](std::string& d) {
    for (int i = 0; i <= 1000; ++i) {
      const auto m = mills_ratio(i * 0.01);
      if (!(m.lower1 <= m.lower2 + 1e-12 && m.lower2 <= m.value + 1e-12 &&
            m.value <= m.upper + 1e-12)) {
        d = "chain broken at z=" + std::to_string(i * 0.01);
        return false;
      }
    }
    d = "ordering holds on z in [0,10] step 0.01";
    return true;
  }});

  checks.push_back({"self-concordance-sandwich", [seed, mc](std::string& d) {
    Rng rng(split_seed(seed, 1));
    double worst = 0.0;
    for (long t = 0; t < mc; ++t) {
      const double x0 = 60.0 * (rng.uniform() - 0.5);
      const double u = 60.0 * (rng.uniform() - 0.5);
      const auto s = self_concordance_bounds(x0, u);
      worst = std::max({worst, s.lower - s.mid, s.mid - s.upper});
    }
    d = "worst slack " + std::to_string(worst);
    return worst <= 1e-12;
  }});

  checks.push_back({"h-lower-bound", [](std::string& d) {
    for (int i = 1; i <= 5000; ++i) {
      const auto h = h_lower_bound(i * 0.01);
      if (h.h < h.bound - 1e-12) {
        d = "violated at x=" + std::to_string(i * 0.01);
        return false;
      }
    }
    d = "H(x) >= x^2/(2+x) on (0,50]";
    return true;
  }});

  checks.push_back({"gauss-laplace-integral", [seed](std::string& d) {
    for (double a : {0.1, 1.0, 10.0}) {
      for (double b : {0.1, 1.0, 10.0}) {
        const long cells = 2000000;
        const double h = 80.0 / cells;
        double acc = 0.0;
        for (long i = 0; i < cells; ++i) {
          const double u = -40.0 + (i + 0.5) * h;
          acc += std::exp(-0.5 * a * u * u - b * std::abs(u));
        }
        acc *= h;
        const double closed = laplace_gauss_integral(a, b);
        if (std::abs(closed - acc) > 1e-7 * acc) {
          d = "mismatch at a=" + std::to_string(a) + " b=" + std::to_string(b);
          return false;
        }
      }
    }
    Rng rng(split_seed(seed, 2));
    for (int t = 0; t < 200; ++t) {
      const double rho = std::exp(2.0 * rng.normal());
      const double L = std::exp(2.0 * rng.normal());
      if (laplace_gauss_integral(L, rho) < 2.0 * rho / (L + rho * rho) - 1e-12) {
        d = "normalizer lower bound violated";
        return false;
      }
    }
    d = "closed form matches quadrature; 2rho/(L+rho^2) lower bound holds";
    return true;
  }});

  checks.push_back({"phi-r-definition", [seed](std::string& d) {
    Rng rng(split_seed(seed, 3));
    for (int t = 0; t < 100; ++t) {
      const double tau = std::exp(rng.normal());
      const double b = std::exp(rng.normal());
      const double a = rng.uniform() * 0.9 * tau / b + 1e-4;
      const RateFunction r(tau, b);
      const double x0 = phi_r(r, a);
      for (int g = 0; g <= 50; ++g) {
        const double z = x0 * (1.0 + g / 5.0);
        if (r(z) < a * z - 1e-10 * (1.0 + a * z)) {
          d = "r(z) < a z beyond phi_r(a)";
          return false;
        }
      }
      if (x0 > 0.0 && r(0.99 * x0) >= a * 0.99 * x0) {
        d = "phi_r not minimal";
        return false;
      }
    }
    d = "r dominates a z from phi_r(a) on, and not before";
    return true;
  }});

  checks.push_back({"rate-shift-infimum-bound", [seed](std::string& d) {
    Rng rng(split_seed(seed, 4));
    for (int t = 0; t < 200; ++t) {
      const double tau = std::exp(rng.normal());
      const double b = std::exp(rng.normal());
      const double c = rng.uniform() * tau / ((4.0 / 3.0) * b);
      const auto rs = rate_shift_infimum(RateFunction(tau, b), c);
      if (!rs.bound_valid || rs.exact_inf < rs.paper_bound - 1e-10) {
        d = "paper bound violated";
        return false;
      }
    }
    d = "exact infimum dominates -c^2/(2 tau) when tau >= (4/3) b c";
    return true;
  }});

  checks.push_back({"split-cone-closure", [seed](std::string& d) {
    Rng rng(split_seed(seed, 5));
    const int dim = 6;
    std::vector<ConeSpec> cones = {
        ConeSpec::full_space(dim), ConeSpec::s_sparse(dim, 3),
        ConeSpec::pattern_cone(SparsityPattern(dim, {0, 2})),
        ConeSpec::n_cone(SparsityPattern(dim, {0, 2}))};
    for (int t = 0; t < 500; ++t) {
      SparseParam v = SparseParam::zero(dim);
      for (int j = 0; j < dim; ++j)
        if (rng.bernoulli(0.5)) v.set(j, rng.normal());
      const double lam = std::exp(2.0 * rng.normal());
      for (const auto& cone : cones) {
        if (!cone_contains(cone, v)) continue;
        SparseParam s = v, f = v;
        for (auto& x : s.values) x *= lam;
        for (auto& x : f.values)
          if (rng.bernoulli(0.5)) x = -x;
        if (!cone_contains(cone, s) || !cone_contains(cone, f)) {
          d = "closure violated";
          return false;
        }
      }
    }
    d = "closed under scaling and sign flips (500 random trials)";
    return true;
  }});

  checks.push_back({"tnorm-frobenius-sandwich", [seed](std::string& d) {
    Rng rng(split_seed(seed, 6));
    for (int t = 0; t < 200; ++t) {
      const int p = 5;
      Eigen::MatrixXd m(p, p);
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) m(i, j) = rng.bernoulli(0.4) ? rng.normal() : 0.0;
      const double tn = tnorm(MatrixParam::from_dense(m));
      if (tn > m.norm() + 1e-12 || m.norm() > std::sqrt(5.0) * tn + 1e-12) {
        d = "sandwich violated";
        return false;
      }
    }
    d = "tnorm <= frobenius <= sqrt(p) tnorm (200 random matrices)";
    return true;
  }});

  checks.push_back({"prior-weights-sum", [](std::string& d) {
    auto spec = PriorSpec::beta_binomial(10, 2.0, 1.0);
    double total = 0.0;
    for (unsigned mask = 0; mask < (1u << 10); ++mask)
      total += std::exp(spec.log_pattern_weight(__builtin_popcount(mask)));
    d = "sum over 2^10 patterns = " + std::to_string(total);
    return std::abs(total - 1.0) <= 1e-10;
  }});

  checks.push_back({"h2-beta-binomial", [](std::string& d) {
    for (int dim : {5, 10, 50}) {
      if (!check_h2(PriorSpec::beta_binomial(dim, 2.0, 1.0)).all_pass) {
        d = "H2 fails at d=" + std::to_string(dim);
        return false;
      }
    }
    d = "beta-binomial(u=2) passes (1/2, 1, 2, 1) at d in {5,10,50}";
    return true;
  }});

  checks.push_back({"gradient-finite-differences", [seed](std::string& d) {
    Rng rng(split_seed(seed, 7));
    for (int t = 0; t < 20; ++t) {
      Eigen::MatrixXd X = rademacher_design(30, 5, rng);
      SparseParam star = SparseParam::zero(5);
      star.set(0, 1.0);
      LogisticData data = generate_logistic_data(star, X, rng);
      SparseParam theta = SparseParam::zero(5);
      for (int j = 0; j < 5; ++j)
        if (rng.bernoulli(0.6)) theta.set(j, rng.normal());
      const Eigen::VectorXd g = grad_log_quasi_likelihood(theta, data);
      for (int j = 0; j < 5; ++j) {
        const double h = 1e-5 * (1.0 + std::abs(theta[j]));
        SparseParam up = theta, dn = theta;
        up.set(j, theta[j] + h);
        dn.set(j, theta[j] - h);
        const double fd = (log_quasi_likelihood(up, data) -
                           log_quasi_likelihood(dn, data)) / (2.0 * h);
        if (std::abs(g[j] - fd) > 1e-6 * (1.0 + std::abs(g[j]))) {
          d = "gradient mismatch";
          return false;
        }
      }
    }
    d = "analytic gradient matches central differences (20 random points)";
    return true;
  }});

  checks.push_back({"bregman-concavity", [seed](std::string& d) {
    Rng rng(split_seed(seed, 8));
    Eigen::MatrixXd X = rademacher_design(40, 5, rng);
    SparseParam star0 = SparseParam::zero(5);
    star0.set(1, 1.0);
    LogisticData data = generate_logistic_data(star0, X, rng);
    for (int t = 0; t < 1000; ++t) {
      SparseParam a = SparseParam::zero(5), b = SparseParam::zero(5);
      for (int j = 0; j < 5; ++j) {
        if (rng.bernoulli(0.7)) a.set(j, 2.0 * rng.normal());
        if (rng.bernoulli(0.7)) b.set(j, 2.0 * rng.normal());
      }
      if (bregman_divergence(a, b, data) > 1e-12) {
        d = "positive bregman divergence";
        return false;
      }
    }
    d = "L <= 0 on 1000 random pairs";
    return true;
  }});

  checks.push_back({"curvature-envelopes", [seed](std::string& d) {
    Rng rng(split_seed(seed, 9));
    const int dim = 8;
    const long n = 50;
    Eigen::MatrixXd X = rademacher_design(n, dim, rng);
    SparseParam star = SparseParam::zero(dim);
    star.set(0, 1.0);
    star.set(3, -1.2);
    LogisticData data = generate_logistic_data(star, X, rng);
    const SparsityPattern delta = sparsity_pattern(star);
    const auto cs = curvature_summary(data);
    const double kbar = restricted_eig_sparse(cs.gram, delta.size(), EigMode::Max);
    const double cert = restricted_eig_cone(cs.fisher, delta).certificate;
    if (cert <= 0.0) {
      d = "degenerate design in the check itself";
      return false;
    }
    const RateFunction r(n * cert, 4.0 * std::sqrt(2.0) * cs.x_inf);
    for (int t = 0; t < 100; ++t) {
      SparseParam theta = star;
      for (int j : delta.active) theta.set(j, theta[j] + rng.normal());
      const double x = (theta.dense() - star.dense()).norm();
      const double L = bregman_divergence(theta, star, data);
      if (L < -(n / 8.0) * kbar * x * x - 1e-9) {
        d = "lower envelope violated";
        return false;
      }
      if (x > 0.0 && L > -0.5 * r(x) + 1e-9) {
        d = "upper envelope violated";
        return false;
      }
    }
    d = "theta*-cone curvature envelopes hold (100 draws)";
    return true;
  }});

  checks.push_back({"restricted-eig-relations", [seed](std::string& d) {
    Rng rng(split_seed(seed, 10));
    Eigen::MatrixXd X = rademacher_design(40, 6, rng);
    SparseParam star = SparseParam::zero(6);
    star.set(2, 0.8);
    LogisticData data = generate_logistic_data(star, X, rng);
    const auto cs = curvature_summary(data);
    const double kbar1 = restricted_eig_sparse(cs.gram, 1, EigMode::Max);
    if (kbar1 > cs.x_inf * cs.x_inf + 1e-12) {
      d = "kbar1(1) > Xinf^2";
      return false;
    }
    double prev = kInf;
    for (int s = 1; s <= 5; ++s) {
      const double k = restricted_eig_sparse(cs.fisher, s, EigMode::Min);
      if (k > kbar1 / 4.0 + 1e-12 || k > prev + 1e-12) {
        d = "kappa1(s) relations violated at s=" + std::to_string(s);
        return false;
      }
      prev = k;
    }
    d = "kappa1(s) <= kbar1(1)/4 <= Xinf^2/4 and monotone";
    return true;
  }});

  checks.push_back({"ising-pmf-sums", [seed](std::string& d) {
    Rng rng(split_seed(seed, 11));
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(10, 10);
    for (int i = 0; i < 10; ++i) {
      t(i, i) = 0.3 * rng.normal();
      for (int j = i + 1; j < 10; ++j)
        if (rng.bernoulli(0.3)) t(i, j) = t(j, i) = 0.5 * rng.normal();
    }
    IsingTable table((IsingModel(t)));
    double total = 0.0;
    for (std::size_t s = 0; s < (1u << 10); ++s) total += std::exp(table.log_pmf(s));
    d = "sum over 2^10 states = " + std::to_string(total);
    return std::abs(total - 1.0) <= 1e-10;
  }});

  checks.push_back({"gibbs-conditional-formula", [seed](std::string& d) {
    Rng rng(split_seed(seed, 12));
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(5, 5);
    t(0, 1) = t(1, 0) = 1.0;
    t(2, 2) = -0.5;
    const IsingModel m(t);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<int> x(5);
      for (auto& b : x) b = rng.bernoulli(0.5) ? 1 : 0;
      const int j = rng.uniform_int(5);
      double field = m.theta(j, j);
      for (int k = 0; k < 5; ++k)
        if (k != j && x[k]) field += m.theta(k, j);
      if (std::abs(gibbs_conditional(m, x, j) - sigmoid(field)) > 1e-15) {
        d = "conditional mismatch";
        return false;
      }
    }
    d = "heat-bath conditionals equal g'(theta_jj + sum theta_kj x_k)";
    return true;
  }});

  checks.push_back({"pseudo-likelihood-columns", [seed](std::string& d) {
    Rng rng(split_seed(seed, 13));
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(5, 5);
    t(0, 1) = t(1, 0) = 1.2;
    t(3, 4) = t(4, 3) = -0.7;
    const IsingModel m(t);
    IsingData data = sample_ising_exact(m, 150, rng);
    const MatrixParam theta = MatrixParam::from_dense(m.theta);
    const auto pl = pseudo_log_likelihood(theta, data);
    double total = 0.0;
    for (int j = 0; j < 5; ++j) {
      LogisticData col;
      col.X = design_for_column(data.Z, j);
      col.y = data.Z.col(j);
      const double ll = log_quasi_likelihood(theta.columns[j], col);
      if (std::abs(ll - pl.per_column[j]) > 1e-12) {
        d = "cross-module mismatch at column " + std::to_string(j + 1);
        return false;
      }
      total += pl.per_column[j];
    }
    d = "column sum identity and logistic equality hold";
    return std::abs(total - pl.total) <= 1e-12;
  }});

  checks.push_back({"population-fisher-independence", [](std::string& d) {
    const Eigen::MatrixXd H = population_fisher(IsingModel(Eigen::MatrixXd::Zero(2, 2)), 0);
    Eigen::MatrixXd expect(2, 2);
    expect << 0.25, 0.125, 0.125, 0.125;
    d = "H^(1) at theta*=0, p=2 equals (1/4)[[1,1/2],[1/2,1/2]]";
    return (H - expect).cwiseAbs().maxCoeff() <= 1e-12;
  }});

  checks.push_back({"detailed-balance-flip", [](std::string& d) {
    LogisticData data;
    data.X.resize(3, 1);
    data.X << 1.0, -1.0, 1.0;
    data.y.resize(3);
    data.y << 1.0, 0.0, 1.0;
    const double rho = 2.0;
    auto prior = PriorSpec::explicit_law(1, {0.5, 0.5}, rho);
    const double lp0 = prior.log_pattern_weight(0);
    const double lp1 = prior.log_pattern_weight(1);
    const double q0 = log_quasi_likelihood(SparseParam::zero(1), data);
    for (double v : {-1.0, 0.25, 2.0}) {
      SparseParam tv = SparseParam::zero(1);
      tv.set(0, v);
      const double qv = log_quasi_likelihood(tv, data);
      const double ab = std::exp(std::min(0.0, detail::flip_log_accept(lp1, lp0, qv, q0)));
      const double ad = std::exp(std::min(0.0, detail::flip_log_accept(lp0, lp1, q0, qv)));
      const double lhs = std::exp(lp0 + q0) * ab;
      const double rhs = std::exp(lp1 + qv) * ad;
      if (std::abs(lhs - rhs) > 1e-12 * std::max(lhs, rhs)) {
        d = "flip kernel violates detailed balance";
        return false;
      }
    }
    d = "MH flip acceptance satisfies detailed balance to 1e-12";
    return true;
  }});

  checks.push_back({"prior-recovery-chain", [seed, quick](std::string& d) {
    const int dim = 6;
    auto prior = PriorSpec::beta_binomial(dim, 2.0, 2.0);
    ChainConfig cfg;
    cfg.iterations = quick ? 100000 : 500000;
    cfg.burnin = cfg.iterations / 10;
    cfg.seed = split_seed(seed, 14);
    cfg.store_draws = false;
    const auto sm = run_chain(FlatModel(dim), prior, cfg, SparseParam::zero(dim));
    double expect = 0.0;
    for (int s = 0; s <= dim; ++s) expect += std::exp(prior.log_g(s)) * s / dim;
    double worst = 0.0;
    for (int j = 0; j < dim; ++j)
      worst = std::max(worst, std::abs(sm.inclusion_probs[j] - expect));
    d = "worst inclusion-probability gap " + std::to_string(worst);
    return worst <= (quick ? 0.03 : 0.02);
  }});

  checks.push_back({"oracle-prior-recovery", [](std::string& d) {
    auto prior = PriorSpec::beta_binomial(3, 2.0, 1.0);
    OracleConfig cfg;
    cfg.points = 40;
    cfg.half_width = 40.0;
    const auto op = exact_posterior_oracle(FlatModel(3), prior, cfg);
    double worst = 0.0;
    for (const auto& sw : op.supports)
      worst = std::max(worst, std::abs(sw.posterior_prob -
                                       std::exp(prior.log_pattern_weight(
                                           sw.pattern.size()))));
    d = "worst support-probability gap " + std::to_string(worst);
    return worst <= 1e-8;
  }});

  checks.push_back({"seed-determinism", [seed](std::string& d) {
    Rng rng(split_seed(seed, 15));
    Eigen::MatrixXd X = rademacher_design(30, 4, rng);
    SparseParam star = SparseParam::zero(4);
    star.set(0, 1.0);
    LogisticData data = generate_logistic_data(star, X, rng);
    auto prior = PriorSpec::beta_binomial(4, 2.0, 2.0);
    ChainConfig cfg;
    cfg.iterations = 5000;
    cfg.burnin = 500;
    cfg.seed = split_seed(seed, 16);
    const LogisticModel model(data.X, data.y);
    const auto a = run_chain(model, prior, cfg, SparseParam::zero(4));
    const auto b = run_chain(model, prior, cfg, SparseParam::zero(4));
    d = "identical summaries under a shared seed";
    if (a.draws.size() != b.draws.size()) return false;
    for (std::size_t i = 0; i < a.draws.size(); ++i)
      if (!(a.draws[i].theta == b.draws[i].theta)) return false;
    return a.inclusion_probs == b.inclusion_probs && a.mean == b.mean;
  }});

  checks.push_back({"e0-margin-brute-force", [seed](std::string& d) {
    Rng rng(split_seed(seed, 17));
    const int dim = 10;
    Eigen::VectorXd g(dim);
    for (int j = 0; j < dim; ++j) g[j] = rng.normal();
    for (int s = 1; s <= dim; ++s) {
      double brute = 0.0;
      for (unsigned mask = 0; mask < (1u << dim); ++mask) {
        if (__builtin_popcount(mask) != s) continue;
        double acc = 0.0;
        for (int j = 0; j < dim; ++j)
          if ((mask >> j) & 1u) acc += g[j] * g[j];
        brute = std::max(brute, std::sqrt(acc));
      }
      const double fast =
          event_margin_e0(g, ConeSpec::s_sparse(dim, s), Normalization::L2, 1.0).margin;
      if (std::abs(fast - brute) > 1e-12) {
        d = "margin mismatch at s=" + std::to_string(s);
        return false;
      }
    }
    d = "top-k margin equals brute force over all supports (d=10)";
    return true;
  }});

  checks.push_back({"bound-evaluator-worked-values", [](std::string& d) {
    const auto z = zeta_logistic(3, 1.0, 1000, 1.0, 0.5, 1.0);
    const double rad = contraction_radius_logistic(3.0, 1.0, 0.5, 10, 100, 10000);
    d = "zeta=" + std::to_string(z.zeta) + " radius=" + std::to_string(rad);
    return std::abs(z.zeta - 781.07467365163963) <= 1e-9 &&
           std::abs(rad - 0.40716842546490671) <= 1e-12;
  }});

  bool all_pass = true;
  json rep = json::array();
  for (auto& check : checks) {
    std::string det;
    bool ok = false;
    try {
      ok = check.run(det);
    } catch (const std::exception& e) {
      det = std::string("exception: ") + e.what();
    }
    std::printf("%s  %s (%s)\n", ok ? "PASS" : "FAIL", check.name.c_str(), det.c_str());
    std::fflush(stdout);
    rep.push_back({{"name", check.name}, {"pass", ok}, {"detail", det}});
    all_pass = all_pass && ok;
  }
  if (report_out) {
    *report_out = json::object();
    (*report_out)["checks"] = rep;
    (*report_out)["all_pass"] = all_pass;
  }
  return all_pass;
}

}  // namespace qpost

#endif  // QPOST_VERIFY_HPP
