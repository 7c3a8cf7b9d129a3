#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "qpost/ising.hpp"

using namespace qpost;
using Catch::Approx;

namespace {
IsingModel random_model(int p, std::uint64_t seed, double coupling_scale = 0.6) {
  Rng rng(seed);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    t(i, i) = 0.5 * rng.normal();
    for (int j = i + 1; j < p; ++j) {
      if (rng.bernoulli(0.4)) {
        t(i, j) = coupling_scale * rng.normal();
        t(j, i) = t(i, j);
      }
    }
  }
  return IsingModel(t);
}

// Direct O(2^p p^2) partition oracle, independent of the Gray-code path.
double log_partition_oracle(const IsingModel& m) {
  double mx = -kInf;
  std::vector<double> energies;
  for (std::size_t s = 0; s < (std::size_t{1} << m.p); ++s) {
    std::vector<int> x(m.p);
    for (int j = 0; j < m.p; ++j) x[j] = static_cast<int>((s >> j) & 1u);
    energies.push_back(ising_energy(m, x));
    mx = std::max(mx, energies.back());
  }
  double acc = 0.0;
  for (double e : energies) acc += std::exp(e - mx);
  return mx + std::log(acc);
}
}  // namespace

TEST_CASE("partition function hand cases") {
  {
    IsingModel m(Eigen::MatrixXd::Zero(2, 2));
    CHECK(log_partition(m) == Approx(std::log(4.0)).epsilon(1e-13));
  }
  {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2, 2);
    t(0, 1) = t(1, 0) = std::log(2.0);
    IsingModel m(t);
    CHECK(log_partition(m) == Approx(std::log(5.0)).epsilon(1e-13));
    std::vector<int> x11 = {1, 1};
    CHECK(std::exp(ising_log_pmf(m, x11)) == Approx(0.4).epsilon(1e-12));
  }
  for (double tt : {-1.5, 0.0, 2.0}) {
    Eigen::MatrixXd t(1, 1);
    t << tt;
    CHECK(log_partition(IsingModel(t)) == Approx(log1pexp(tt)).epsilon(1e-13));
  }
  CHECK_THROWS(log_partition(IsingModel(Eigen::MatrixXd::Zero(21, 21))));
  Eigen::MatrixXd asym = Eigen::MatrixXd::Zero(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS(IsingModel(asym));
}

TEST_CASE("gray-code energies match the direct oracle") {
  for (std::uint64_t seed : {10u, 20u, 30u}) {
    IsingModel m = random_model(7, seed);
    CHECK(log_partition(m) == Approx(log_partition_oracle(m)).epsilon(1e-12));
    IsingTable table(m);
    Rng rng(seed + 1);
    for (int t = 0; t < 50; ++t) {
      std::size_t s = rng.next_u64() & ((std::size_t{1} << 7) - 1);
      std::vector<int> x(7);
      for (int j = 0; j < 7; ++j) x[j] = static_cast<int>((s >> j) & 1u);
      CHECK(table.energy[s] == Approx(ising_energy(m, x)).margin(1e-11));
    }
  }
}

TEST_CASE("pmf sums to one") {
  for (int p : {3, 8, 12}) {
    IsingModel m = random_model(p, 77 + p);
    IsingTable table(m);
    double total = 0.0;
    for (std::size_t s = 0; s < (std::size_t{1} << p); ++s)
      total += std::exp(table.log_pmf(s));
    CHECK(total == Approx(1.0).margin(1e-10));
  }
  // theta = 0: every state has probability 2^-p
  IsingModel zero(Eigen::MatrixXd::Zero(3, 3));
  std::vector<int> x = {1, 0, 1};
  CHECK(ising_log_pmf(zero, x) == Approx(-3.0 * std::log(2.0)).epsilon(1e-13));
  // the all-zero state always has energy 0: theta carries no gauge freedom
  IsingModel m = random_model(4, 5);
  std::vector<int> zero_state(4, 0);
  CHECK(ising_energy(m, zero_state) == 0.0);
}

TEST_CASE("exact sampler marginals") {
  // theta = 0: fair independent bits
  {
    IsingModel m(Eigen::MatrixXd::Zero(4, 4));
    Rng rng(11);
    IsingData data = sample_ising_exact(m, 100000, rng);
    for (int j = 0; j < 4; ++j) {
      const double mean = data.Z.col(j).mean();
      CHECK(std::abs(mean - 0.5) <= 3.0 * 0.5 / std::sqrt(100000.0));
    }
  }
  // strong positive coupling induces positive correlation
  {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2, 2);
    t(0, 1) = t(1, 0) = 5.0;
    Rng rng(13);
    IsingData data = sample_ising_exact(IsingModel(t), 20000, rng);
    // both spins sit near 1 here, so the covariance is small but positive
    const Eigen::VectorXd a = data.Z.col(0).array() - data.Z.col(0).mean();
    const Eigen::VectorXd b = data.Z.col(1).array() - data.Z.col(1).mean();
    CHECK(a.dot(b) / 20000.0 > 0.0);
  }
  // pairwise frequencies vs exact pmf marginals at p=8
  {
    IsingModel m = random_model(8, 99);
    Rng rng(17);
    const long n = 100000;
    IsingData data = sample_ising_exact(m, n, rng);
    IsingTable table(m);
    Eigen::MatrixXd exact = Eigen::MatrixXd::Zero(8, 8);
    for (std::size_t s = 0; s < (1u << 8); ++s) {
      const double pr = std::exp(table.log_pmf(s));
      for (int i = 0; i < 8; ++i)
        if ((s >> i) & 1u)
          for (int j = 0; j < 8; ++j)
            if ((s >> j) & 1u) exact(i, j) += pr;
    }
    Eigen::MatrixXd emp = data.Z.transpose() * data.Z / static_cast<double>(n);
    CHECK((emp - exact).cwiseAbs().maxCoeff() <= 0.02);
  }
}

TEST_CASE("gibbs conditionals equal the analytic formula") {
  IsingModel m = random_model(6, 313);
  Rng rng(29);
  for (int t = 0; t < 200; ++t) {
    std::vector<int> x(6);
    for (auto& b : x) b = rng.bernoulli(0.5) ? 1 : 0;
    const int j = rng.uniform_int(6);
    double field = m.theta(j, j);
    for (int k = 0; k < 6; ++k)
      if (k != j && x[k]) field += m.theta(k, j);
    CHECK(gibbs_conditional(m, x, j) == Approx(sigmoid(field)).margin(1e-15));
  }
}

TEST_CASE("gibbs sampler agrees with the exact sampler") {
  IsingModel m = random_model(6, 414, 0.5);
  Rng rng1(31), rng2(37);
  const long n = 60000;
  IsingData exact = sample_ising_exact(m, n, rng1);
  IsingData gibbs = sample_ising_gibbs(m, n, 1000, 5, rng2);
  Eigen::MatrixXd fe = exact.Z.transpose() * exact.Z / static_cast<double>(n);
  Eigen::MatrixXd fg = gibbs.Z.transpose() * gibbs.Z / static_cast<double>(n);
  CHECK((fe - fg).cwiseAbs().maxCoeff() <= 0.02);

  // p=1 reduces to i.i.d. Bernoulli(g'(theta_11))
  Eigen::MatrixXd t(1, 1);
  t << 0.7;
  Rng rng3(41);
  IsingData d1 = sample_ising_gibbs(IsingModel(t), 50000, 10, 1, rng3);
  CHECK(std::abs(d1.Z.col(0).mean() - sigmoid(0.7)) <= 3.0 * 0.5 / std::sqrt(50000.0));

  // determinism under a fixed seed
  Rng a(55), b(55);
  IsingData da = sample_ising_gibbs(m, 100, 50, 2, a);
  IsingData db = sample_ising_gibbs(m, 100, 50, 2, b);
  CHECK(da.Z == db.Z);
}

TEST_CASE("pseudo log-likelihood") {
  IsingModel m = random_model(5, 616);
  Rng rng(43);
  IsingData data = sample_ising_exact(m, 200, rng);

  // theta = 0 gives -n p log 2
  CHECK(pseudo_log_likelihood(MatrixParam(5), data).total ==
        Approx(-200.0 * 5.0 * std::log(2.0)).epsilon(1e-12));

  // column-sum identity and the cross-module equality with the logistic
  // likelihood of (Z_.j, Z^{(j)})
  MatrixParam theta = MatrixParam::from_dense(m.theta);
  const PseudoLogLik pl = pseudo_log_likelihood(theta, data);
  double total = 0.0;
  for (int j = 0; j < 5; ++j) {
    LogisticData col;
    col.X = design_for_column(data.Z, j);
    col.y = data.Z.col(j);
    const double ll = log_quasi_likelihood(theta.columns[j], col);
    CHECK(pl.per_column[j] == Approx(ll).margin(1e-12));
    total += pl.per_column[j];
  }
  CHECK(pl.total == Approx(total).margin(1e-12));

  // p = 1: intercept-only logistic likelihood on that column
  Eigen::MatrixXd t1(1, 1);
  t1 << 0.4;
  Rng rng1(47);
  IsingData one = sample_ising_exact(IsingModel(t1), 100, rng1);
  MatrixParam mp(1);
  mp.columns[0].set(0, 0.4);
  const double eta = 0.4;
  double expect = 0.0;
  for (long i = 0; i < 100; ++i) expect += one.Z(i, 0) * eta - log1pexp(eta);
  CHECK(pseudo_log_likelihood(mp, one).total == Approx(expect).margin(1e-12));
}

TEST_CASE("population fisher at independence") {
  IsingModel zero2(Eigen::MatrixXd::Zero(2, 2));
  const Eigen::MatrixXd H = population_fisher(zero2, 0);
  Eigen::MatrixXd expect(2, 2);
  expect << 1.0, 0.5, 0.5, 0.5;
  expect *= 0.25;
  CHECK((H - expect).cwiseAbs().maxCoeff() <= 1e-12);

  // general p at theta* = 0: (1/4) E[X X'] with fair independent bits
  IsingModel zero4(Eigen::MatrixXd::Zero(4, 4));
  for (int j = 0; j < 4; ++j) {
    const Eigen::MatrixXd Hj = population_fisher(zero4, j);
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        double moment;  // E[X_a X_b] with X_j = 1
        if (a == j && b == j) moment = 1.0;
        else if (a == j || b == j) moment = 0.5;
        else if (a == b) moment = 0.5;
        else moment = 0.25;
        CHECK(Hj(a, b) == Approx(0.25 * moment).margin(1e-12));
      }
    }
  }

  // PSD on random models
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    IsingModel m = random_model(5, 818 + seed);
    for (int j = 0; j < 5; ++j) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(population_fisher(m, j),
                                                        Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues()[0] >= -1e-12);
    }
  }
}

TEST_CASE("population fisher matches empirical average over exact samples") {
  IsingModel m = random_model(6, 919, 0.4);
  Rng rng(61);
  const long n = 100000;
  IsingData data = sample_ising_exact(m, n, rng);
  for (int j : {0, 3}) {
    const Eigen::MatrixXd H = population_fisher(m, j);
    Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(6, 6);
    Eigen::VectorXd x(6);
    for (long i = 0; i < n; ++i) {
      x = data.Z.row(i);
      x[j] = 1.0;
      emp.noalias() += logistic_link(m.theta.col(j).dot(x)).g2 * (x * x.transpose());
    }
    emp /= static_cast<double>(n);
    // entrywise within 3 s.e.; the summand is bounded by 1/4 so s.e. <= 1/(8 sqrt n)
    const double tol = 3.0 * 0.25 / (2.0 * std::sqrt(static_cast<double>(n)));
    CHECK((emp - H).cwiseAbs().maxCoeff() <= tol);
  }
}

TEST_CASE("kappa2 quantities") {
  IsingModel zero2(Eigen::MatrixXd::Zero(2, 2));
  auto k = kappa2_quantities(zero2, 1);
  CHECK(k.sparse_min == Approx(0.125).margin(1e-12));  // min diagonal of the H's

  // s = p: unrestricted lambda_min minimized over columns
  IsingModel m = random_model(4, 232);
  auto kp = kappa2_quantities(m, 4);
  double expect = kInf;
  for (int j = 0; j < 4; ++j) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(population_fisher(m, j),
                                                      Eigen::EigenvaluesOnly);
    expect = std::min(expect, es.eigenvalues()[0]);
  }
  CHECK(kp.sparse_min == Approx(expect).margin(1e-10));

  // monotone nonincreasing in s
  double prev = kInf;
  for (int s = 1; s <= 4; ++s) {
    auto ks = kappa2_quantities(m, s);
    CHECK(ks.sparse_min <= prev + 1e-12);
    prev = ks.sparse_min;
    CHECK(ks.cone_min >= ks.cone_certificate_min - 1e-12);
  }
}

TEST_CASE("zeta ising worked values") {
  // term-by-term in 30-digit arithmetic: s*_j=2, c4=1, p=100, kappa2=0.1
  auto z = zeta_ising(2, 1.0, 100, 0.1);
  CHECK(z.zeta == Approx(5132.0786030619940).epsilon(1e-12));
  CHECK(z.s_bar == static_cast<int>(std::ceil(2.0 + 5132.0786030619940)));

  auto z0 = zeta_ising(0, 1.0, 100, 0.1);
  CHECK(z0.zeta == Approx(4.0).epsilon(1e-14));

  // linear growth in 1/kappa2
  const double z1 = zeta_ising(2, 1.0, 100, 0.1).zeta;
  const double z2 = zeta_ising(2, 1.0, 100, 0.05).zeta;
  const double z3 = zeta_ising(2, 1.0, 100, 0.025).zeta;
  CHECK(z3 - z2 == Approx(2.0 * (z2 - z1)).epsilon(1e-9));
  CHECK_THROWS(zeta_ising(2, 1.0, 100, 0.0));
}

TEST_CASE("ising contraction radii worked values") {
  std::vector<int> sbar(10, 3);
  auto r = contraction_radii_ising(3.0, 0.5, sbar, 10, 10000);
  CHECK(r.frobenius == Approx(0.49867744088073298).epsilon(1e-12));
  CHECK(r.tnorm == Approx(0.15769565309270796).epsilon(1e-12));
  // equal budgets: frobenius = tnorm * sqrt(p)
  CHECK(r.frobenius == Approx(r.tnorm * std::sqrt(10.0)).epsilon(1e-12));
  // n -> 4n halves both
  auto r4 = contraction_radii_ising(3.0, 0.5, sbar, 10, 40000);
  CHECK(r4.frobenius == Approx(0.5 * r.frobenius).epsilon(1e-12));
  CHECK(r4.tnorm == Approx(0.5 * r.tnorm).epsilon(1e-12));
}

TEST_CASE("symmetrize rules") {
  Eigen::MatrixXd m(2, 2);
  m << 0.0, 3.0, -1.0, 0.0;
  CHECK(symmetrize(m, SymmetrizeRule::Average)(0, 1) == Approx(1.0));
  CHECK(symmetrize(m, SymmetrizeRule::MinMagnitude)(0, 1) == Approx(-1.0));
  CHECK(symmetrize(m, SymmetrizeRule::MaxMagnitude)(0, 1) == Approx(3.0));
  for (auto rule : {SymmetrizeRule::Average, SymmetrizeRule::MinMagnitude,
                    SymmetrizeRule::MaxMagnitude}) {
    const Eigen::MatrixXd s = symmetrize(m, rule);
    CHECK(s(0, 1) == s(1, 0));
  }
}
