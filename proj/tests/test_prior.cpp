#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <map>

#include "qpost/prior.hpp"

using namespace qpost;
using Catch::Approx;

namespace {
// Independent Beta-function oracle for the beta-binomial pattern weight:
// pi_delta = B(1+s, d^u + d - s) / B(1, d^u).
double beta_ratio_oracle(int d, double u, int s) {
  const double du = std::pow(static_cast<double>(d), u);
  return std::exp(lbeta(1.0 + s, du + d - s) - lbeta(1.0, du));
}
}  // namespace

TEST_CASE("beta-binomial pattern weights match the Beta-ratio oracle") {
  auto spec = PriorSpec::beta_binomial(10, 2.0, 1.0);
  // d=10, u=2: empty pattern weight is B(1,110)/B(1,100) = 100/110
  CHECK(support_log_weight(spec, SparsityPattern(10, {})) ==
        Approx(std::log(100.0 / 110.0)).epsilon(1e-12));
  CHECK(std::exp(support_log_weight(spec, SparsityPattern(10, {3}))) ==
        Approx(100.0 / (110.0 * 109.0)).epsilon(1e-12));
  CHECK(std::exp(support_log_weight(spec, SparsityPattern(10, {3}))) ==
        Approx(beta_ratio_oracle(10, 2.0, 1)).epsilon(1e-12));
  for (int s = 0; s <= 10; ++s)
    CHECK(spec.log_pattern_weight(s) ==
          Approx(std::log(beta_ratio_oracle(10, 2.0, s))).margin(1e-10));
}

TEST_CASE("explicit point mass at zero support") {
  auto spec = PriorSpec::explicit_law(4, {1.0}, 1.0);
  CHECK(support_log_weight(spec, SparsityPattern(4, {})) == Approx(0.0).margin(1e-15));
  CHECK(support_log_weight(spec, SparsityPattern(4, {1})) == -kInf);
}

TEST_CASE("pattern weights sum to one by full enumeration") {
  for (int d : {6, 10, 12}) {
    auto spec = PriorSpec::beta_binomial(d, 2.0, 1.0);
    double total = 0.0;
    for (unsigned mask = 0; mask < (1u << d); ++mask)
      total += std::exp(spec.log_pattern_weight(__builtin_popcount(mask)));
    CHECK(total == Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("check_h2 on the beta-binomial and counterexamples") {
  // beta-binomial(u=2) must pass its claimed (1/2, 1, 2, 1) for all s
  for (int d : {5, 10, 50}) {
    auto spec = PriorSpec::beta_binomial(d, 2.0, 1.0);
    auto rep = check_h2(spec);
    CHECK(rep.all_pass);
    // exact ratio bounds: g_s/g_{s-1} in [d^{-u}/2, d^{-(u-1)}]
    CHECK(rep.min_ratio >= 0.5 * std::pow(d, -2.0));
    CHECK(rep.max_ratio <= std::pow(d, -1.0));
  }

  // uniform law with claimed c4=1 fails: ratio 1 > c2/d
  {
    std::vector<double> g(11, 1.0 / 11.0);
    auto spec = PriorSpec::explicit_law(10, g, 1.0, H2Constants{0.5, 1.0, 2.0, 1.0});
    auto rep = check_h2(spec);
    CHECK_FALSE(rep.all_pass);
    CHECK(rep.max_ratio == Approx(1.0).epsilon(1e-12));
  }

  // geometric law with ratio exactly c2 d^{-c4} passes at the upper boundary
  {
    const int d = 10;
    const double r = 1.0 / 10.0;
    std::vector<double> g(d + 1);
    double total = 0.0;
    for (int s = 0; s <= d; ++s) total += std::pow(r, s);
    for (int s = 0; s <= d; ++s) g[s] = std::pow(r, s) / total;
    auto spec = PriorSpec::explicit_law(d, g, 1.0, H2Constants{0.01, 1.0, 3.0, 1.0});
    CHECK(check_h2(spec).all_pass);
  }
}

TEST_CASE("log prior density on hand cases") {
  // d=2, g=(1/2,1/2,0), rho=2, theta=(1,0): log((1/2)(1/2) e^-2) = log(1/4) - 2
  auto spec = PriorSpec::explicit_law(2, {0.5, 0.5}, 2.0);
  SparseParam theta = SparseParam::zero(2);
  theta.set(0, 1.0);
  CHECK(log_prior_density(spec, theta) == Approx(std::log(0.25) - 2.0).epsilon(1e-12));

  // theta = 0 gives log pi_empty
  CHECK(log_prior_density(spec, SparseParam::zero(2)) == Approx(std::log(0.5)).epsilon(1e-12));

  // impossible support
  SparseParam two = theta;
  two.set(1, 1.0);
  CHECK(log_prior_density(spec, two) == -kInf);

  // doubling rho changes the value by |delta| log 2 - delta_rho * l1
  auto spec2 = PriorSpec::explicit_law(2, {0.5, 0.5}, 4.0);
  const double diff = log_prior_density(spec2, theta) - log_prior_density(spec, theta);
  CHECK(diff == Approx(std::log(2.0) - 2.0 * 1.0).epsilon(1e-12));
}

TEST_CASE("log prior density is invariant under sign flips") {
  auto spec = PriorSpec::beta_binomial(8, 2.0, 3.0);
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    SparseParam v = SparseParam::zero(8);
    for (int j = 0; j < 8; ++j)
      if (rng.bernoulli(0.4)) v.set(j, rng.normal());
    SparseParam flipped = v;
    for (auto& x : flipped.values)
      if (rng.bernoulli(0.5)) x = -x;
    CHECK(log_prior_density(spec, flipped) ==
          Approx(log_prior_density(spec, v)).margin(1e-12));
  }
}

TEST_CASE("rho selectors") {
  CHECK(select_rho_logistic(1.0, 100, 50) ==
        Approx(4.0 * std::sqrt(100.0 * std::log(50.0))).epsilon(1e-14));
  CHECK(select_rho_logistic(1.0, 100, 50) == Approx(79.11533861).epsilon(1e-8));
  CHECK(select_rho_logistic(2.0, 100, 50) ==
        Approx(2.0 * select_rho_logistic(1.0, 100, 50)).epsilon(1e-14));
  CHECK(select_rho_logistic(1.0, 400, 50) ==
        Approx(2.0 * select_rho_logistic(1.0, 100, 50)).epsilon(1e-14));
  CHECK_THROWS(select_rho_logistic(1.0, 100, 1));

  CHECK(select_rho_ising(100, 10) ==
        Approx(24.0 * std::sqrt(100.0 * std::log(10.0))).epsilon(1e-14));
  CHECK(select_rho_ising(100, 10) == Approx(364.1825114).epsilon(1e-8));
  CHECK(select_rho_ising(1, 3) == Approx(24.0 * std::sqrt(std::log(3.0))).epsilon(1e-14));
  CHECK(select_rho_ising(400, 10) == Approx(2.0 * select_rho_ising(100, 10)).epsilon(1e-14));
  CHECK_THROWS(select_rho_ising(100, 1));
}

TEST_CASE("prior sampling matches the law of large numbers") {
  // point mass at zero support always returns the zero vector
  {
    auto spec = PriorSpec::explicit_law(5, {1.0}, 1.0);
    Rng rng(1);
    for (int t = 0; t < 20; ++t) CHECK(sample_prior(spec, rng).support_size() == 0);
  }

  auto spec = PriorSpec::explicit_law(6, {0.3, 0.4, 0.2, 0.1}, 2.0);
  Rng rng(99);
  const int N = 100000;
  double mean_size = 0.0, mean_abs = 0.0;
  long n_active = 0;
  for (int t = 0; t < N; ++t) {
    SparseParam v = sample_prior(spec, rng);
    mean_size += v.support_size();
    for (double x : v.values) {
      mean_abs += std::abs(x);
      ++n_active;
    }
  }
  mean_size /= N;
  mean_abs /= n_active;
  const double expect_size = 0.3 * 0 + 0.4 * 1 + 0.2 * 2 + 0.1 * 3;
  const double var_size = 0.4 + 0.2 * 4 + 0.1 * 9 - expect_size * expect_size;
  CHECK(std::abs(mean_size - expect_size) <= 3.0 * std::sqrt(var_size / N));
  // Laplace(rho): E|x| = 1/rho, Var|x| = 1/rho^2
  CHECK(std::abs(mean_abs - 0.5) <= 3.0 * 0.5 / std::sqrt(static_cast<double>(n_active)));
}

TEST_CASE("sampled patterns of a given size are uniform") {
  auto spec = PriorSpec::explicit_law(5, {0.0, 0.0, 1.0}, 1.0);  // always size 2
  Rng rng(3);
  std::map<std::vector<int>, int> counts;
  const int N = 50000;
  for (int t = 0; t < N; ++t) counts[sample_prior(spec, rng).pattern.active]++;
  CHECK(counts.size() == 10);
  for (const auto& [pat, c] : counts)
    CHECK(std::abs(c / static_cast<double>(N) - 0.1) < 0.01);
}

TEST_CASE("prior spec validation") {
  CHECK_THROWS(PriorSpec::beta_binomial(10, 1.0, 1.0));   // u > 1 required
  CHECK_THROWS(PriorSpec::beta_binomial(10, 2.0, 0.0));   // rho > 0
  CHECK_THROWS(PriorSpec::explicit_law(3, {0.5, 0.4}, 1.0));  // must sum to 1
  CHECK_THROWS(PriorSpec::explicit_law(3, {-0.1, 1.1}, 1.0));
}
