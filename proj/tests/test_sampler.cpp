#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "qpost/io.hpp"
#include "qpost/sampler.hpp"

using namespace qpost;
using Catch::Approx;

namespace {
double laplace_density(double v, double rho) {
  return 0.5 * rho * std::exp(-rho * std::abs(v));
}
}  // namespace

TEST_CASE("flip move satisfies detailed balance exactly") {
  // d = 1 logistic target; both sides of the detailed-balance identity are
  // assembled from the same acceptance formula the chain uses.
  LogisticData data;
  data.X.resize(4, 1);
  data.X << 1.0, -1.0, 1.0, 1.0;
  data.y.resize(4);
  data.y << 1.0, 0.0, 0.0, 1.0;
  const double rho = 1.5;
  auto prior = PriorSpec::explicit_law(1, {0.4, 0.6}, rho);
  const LogisticModel model(data.X, data.y);

  const double log_pi0 = prior.log_pattern_weight(0);
  const double log_pi1 = prior.log_pattern_weight(1);
  SparseParam zero = SparseParam::zero(1);
  const double q0 = log_quasi_likelihood(zero, data);

  for (double v : {-2.0, -0.7, -1e-3, 0.3, 1.0, 4.0}) {
    SparseParam tv = SparseParam::zero(1);
    tv.set(0, v);
    const double qv = log_quasi_likelihood(tv, data);
    const double la_birth = detail::flip_log_accept(log_pi1, log_pi0, qv, q0);
    const double la_death = detail::flip_log_accept(log_pi0, log_pi1, q0, qv);
    const double alpha_birth = std::exp(std::min(0.0, la_birth));
    const double alpha_death = std::exp(std::min(0.0, la_death));
    // pi(0) q(0) * Laplace(v) * alpha_birth == pi(1) Laplace(v) q(v) * alpha_death
    const double lhs =
        std::exp(log_pi0 + q0) * laplace_density(v, rho) * alpha_birth;
    const double rhs =
        std::exp(log_pi1 + qv) * laplace_density(v, rho) * alpha_death;
    CHECK(lhs == Approx(rhs).epsilon(1e-12));
  }

  // within-model move: symmetric proposal, so the same identity holds with
  // the Laplace slab carried through the l1 penalty
  for (auto [a, b] : std::vector<std::pair<double, double>>{
           {0.5, 1.2}, {-0.3, 0.9}, {2.0, -2.0}, {1e-4, 3.0}}) {
    SparseParam ta = SparseParam::zero(1), tb = SparseParam::zero(1);
    ta.set(0, a);
    tb.set(0, b);
    const double qa = log_quasi_likelihood(ta, data);
    const double qb = log_quasi_likelihood(tb, data);
    const double la_ab =
        detail::walk_log_accept(qb, qa, std::abs(b), std::abs(a), rho);
    const double la_ba =
        detail::walk_log_accept(qa, qb, std::abs(a), std::abs(b), rho);
    const double lhs = std::exp(log_pi1 + qa - rho * std::abs(a)) *
                       std::exp(std::min(0.0, la_ab));
    const double rhs = std::exp(log_pi1 + qb - rho * std::abs(b)) *
                       std::exp(std::min(0.0, la_ba));
    CHECK(lhs == Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("prior recovery under a flat likelihood") {
  const int d = 6;
  auto prior = PriorSpec::beta_binomial(d, 2.0, 2.0);
  ChainConfig cfg;
  cfg.iterations = 500000;
  cfg.burnin = 20000;
  cfg.seed = 424242;
  cfg.store_draws = false;
  const PosteriorSummary sm =
      run_chain(FlatModel(d), prior, cfg, SparseParam::zero(d));

  // exact inclusion probability: sum_s g_s s / d by exchangeability
  double expect_incl = 0.0, expect_size = 0.0;
  for (int s = 0; s <= d; ++s) {
    const double g = std::exp(prior.log_g(s));
    expect_incl += g * s / d;
    expect_size += g * s;
  }
  for (int j = 0; j < d; ++j)
    CHECK(std::abs(sm.inclusion_probs[j] - expect_incl) <= 0.02);
  CHECK(std::abs(sm.mean_support_size - expect_size) <= 0.02);

  // E|theta_j| = P(j active) / rho under the prior
  for (int j = 0; j < d; ++j)
    CHECK(std::abs(sm.mean_abs[j] - expect_incl / prior.rho()) <= 0.01);

  // histogram sums to the retained draw count
  double total = 0.0;
  for (double c : sm.support_size_histogram) total += c;
  CHECK(total == static_cast<double>(sm.retained));
}

TEST_CASE("seed determinism produces identical summaries") {
  Rng rng(5150);
  Eigen::MatrixXd X = rademacher_design(40, 5, rng);
  SparseParam star = SparseParam::zero(5);
  star.set(0, 1.0);
  LogisticData data = generate_logistic_data(star, X, rng);
  auto prior = PriorSpec::beta_binomial(5, 2.0, 2.5);
  ChainConfig cfg;
  cfg.iterations = 20000;
  cfg.burnin = 1000;
  cfg.thin = 4;
  cfg.seed = 99;

  const LogisticModel model(data.X, data.y);
  const PosteriorSummary a = run_chain(model, prior, cfg, SparseParam::zero(5));
  const PosteriorSummary b = run_chain(model, prior, cfg, SparseParam::zero(5));
  CHECK(a.inclusion_probs == b.inclusion_probs);
  CHECK(a.mean == b.mean);
  CHECK(a.support_size_histogram == b.support_size_histogram);
  CHECK(a.retained == b.retained);
  CHECK(a.final_rw_scale == b.final_rw_scale);
  REQUIRE(a.draws.size() == b.draws.size());
  for (std::size_t i = 0; i < a.draws.size(); ++i) {
    CHECK(a.draws[i].iter == b.draws[i].iter);
    CHECK(a.draws[i].theta == b.draws[i].theta);
  }

  ChainConfig other = cfg;
  other.seed = 100;
  const PosteriorSummary c = run_chain(model, prior, cfg, SparseParam::zero(5));
  const PosteriorSummary d2 = run_chain(model, prior, other, SparseParam::zero(5));
  CHECK(c.inclusion_probs != d2.inclusion_probs);
}

TEST_CASE("event probability over retained draws") {
  Rng rng(61);
  Eigen::MatrixXd X = rademacher_design(30, 4, rng);
  SparseParam star = SparseParam::zero(4);
  star.set(1, 1.2);
  LogisticData data = generate_logistic_data(star, X, rng);
  auto prior = PriorSpec::beta_binomial(4, 2.0, 2.0);
  ChainConfig cfg;
  cfg.iterations = 30000;
  cfg.burnin = 2000;
  cfg.seed = 7;
  const PosteriorSummary sm =
      run_chain(LogisticModel(data.X, data.y), prior, cfg, SparseParam::zero(4));

  auto always = event_probability(sm, [](const SparseParam&) { return true; });
  CHECK(always.estimate == 1.0);
  CHECK(always.se == 0.0);

  auto impossible =
      event_probability(sm, [](const SparseParam& t) { return t.support_size() > 4; });
  CHECK(impossible.estimate == 0.0);

  auto half = event_probability(sm, [](const SparseParam& t) {
    return t.support_size() >= 1;
  });
  CHECK(half.estimate >= 0.0);
  CHECK(half.estimate <= 1.0);
  CHECK(half.se <= 0.5 / std::sqrt(static_cast<double>(sm.retained)) + 1e-12);

  PosteriorSummary empty;
  CHECK_THROWS(event_probability(empty, [](const SparseParam&) { return true; }));
}

TEST_CASE("chain rejects a non-finite start") {
  Eigen::MatrixXd X(2, 1);
  X << 1e308, -1e308;
  Eigen::VectorXd y(2);
  y << 1.0, 0.0;
  const LogisticModel model(X, y);
  SparseParam bad = SparseParam::zero(1);
  bad.set(0, 10.0);
  CHECK_THROWS(model.make_state(bad));
}

TEST_CASE("ising column assembly equals standalone chains under shared seeds") {
  Rng rng(71);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(4, 4);
  t(0, 1) = t(1, 0) = 2.0;
  t(2, 3) = t(3, 2) = -1.0;
  IsingModel model(t);
  IsingData data = sample_ising_exact(model, 200, rng);

  auto prior = PriorSpec::beta_binomial(4, 2.0, 3.0);
  ChainConfig cfg;
  cfg.iterations = 40000;
  cfg.burnin = 4000;
  cfg.thin = 2;
  cfg.seed = 2024;

  IsingFitOptions opts;
  opts.frobenius_radii = {1.0};
  opts.tnorm_radii = {0.8};
  const IsingPosterior joint = run_ising_columns(data, prior, cfg, opts);

  for (int j = 0; j < 4; ++j) {
    ChainConfig col = cfg;
    col.seed = ising_column_seed(cfg.seed, j);
    const PosteriorSummary standalone =
        run_chain(ising_column_model(data, j), prior, col, SparseParam::zero(4));
    CHECK(standalone.inclusion_probs == joint.columns[j].inclusion_probs);
    CHECK(standalone.mean == joint.columns[j].mean);
    REQUIRE(standalone.draws.size() == joint.columns[j].draws.size());
    for (std::size_t i = 0; i < standalone.draws.size(); ++i)
      CHECK(standalone.draws[i].theta == joint.columns[j].draws[i].theta);
  }

  // the strong (0,1) edge dominates every null edge in inclusion probability
  const double strong = 0.5 * (joint.inclusion(0, 1) + joint.inclusion(1, 0));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i == j || (i == 0 && j == 1) || (i == 1 && j == 0)) continue;
      if ((i == 2 && j == 3) || (i == 3 && j == 2)) continue;
      CHECK(strong > joint.inclusion(i, j));
    }
  }

  CHECK(joint.event_estimates.count("frobenius_gt_1.000000") == 1);
  CHECK(joint.event_estimates.count("tnorm_gt_0.800000") == 1);
  const auto fe = joint.event_estimates.at("frobenius_gt_1.000000");
  CHECK(fe.estimate >= 0.0);
  CHECK(fe.estimate <= 1.0);

  // parallel execution reproduces the sequential result bit for bit
  IsingFitOptions par = opts;
  par.workers = 2;
  const IsingPosterior joint2 = run_ising_columns(data, prior, cfg, par);
  CHECK(joint.inclusion == joint2.inclusion);
  CHECK(joint.mean == joint2.mean);
  for (const auto& [name, e] : joint.event_estimates) {
    CHECK(joint2.event_estimates.at(name).estimate == e.estimate);
  }
}

TEST_CASE("draw store round trip") {
  Rng rng(81);
  Eigen::MatrixXd X = rademacher_design(20, 3, rng);
  SparseParam star = SparseParam::zero(3);
  star.set(0, 1.0);
  LogisticData data = generate_logistic_data(star, X, rng);
  auto prior = PriorSpec::beta_binomial(3, 2.0, 2.0);
  ChainConfig cfg;
  cfg.iterations = 5000;
  cfg.burnin = 500;
  cfg.thin = 10;
  cfg.seed = 3;
  const PosteriorSummary sm =
      run_chain(LogisticModel(data.X, data.y), prior, cfg, SparseParam::zero(3));
  write_draw_store("/tmp/qpost_test_draws.tsv", sm);
  const auto draws = read_draw_store("/tmp/qpost_test_draws.tsv", 3);
  REQUIRE(draws.size() == sm.draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    CHECK(draws[i].iter == sm.draws[i].iter);
    CHECK(draws[i].theta.pattern == sm.draws[i].theta.pattern);
    for (std::size_t k = 0; k < draws[i].theta.values.size(); ++k)
      CHECK(draws[i].theta.values[k] == Approx(sm.draws[i].theta.values[k]).epsilon(1e-15));
  }
}
