#ifndef QPOST_ISING_HPP
#define QPOST_ISING_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qpost/core.hpp"
#include "qpost/logistic.hpp"
#include "qpost/math.hpp"
#include "qpost/rng.hpp"

namespace qpost {

inline constexpr int kIsingEnumMax = 20;    // 2^p tables for partition/sampling
inline constexpr int kIsingExpectMax = 12;  // 2^p sweeps that also build p x p outer products

// Binary graphical model on {0,1}^p with energy
// sum_j theta_jj x_j + sum_{i<j} theta_ij x_i x_j. theta is symmetric for
// data-generating models; posterior draws live in R^{p x p} unconstrained.
struct IsingModel {
  int p = 0;
  Eigen::MatrixXd theta;

  IsingModel() = default;
  explicit IsingModel(Eigen::MatrixXd t) : p(static_cast<int>(t.rows())), theta(std::move(t)) {
    if (theta.cols() != p) throw std::invalid_argument("IsingModel: square matrix required");
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j)
        if (theta(i, j) != theta(j, i))
          throw std::invalid_argument("IsingModel: symmetric matrix required");
  }

  SparsityPattern column_pattern(int j) const {
    std::vector<int> idx;
    for (int k = 0; k < p; ++k)
      if (theta(k, j) != 0.0) idx.push_back(k);
    return SparsityPattern(p, idx);
  }
};

struct IsingData {
  Eigen::MatrixXd Z;  // n x p with {0,1} entries
  std::optional<IsingModel> theta_star;

  long n() const { return Z.rows(); }
  int p() const { return static_cast<int>(Z.cols()); }

  void validate() const {
    for (long i = 0; i < Z.rows(); ++i)
      for (int j = 0; j < Z.cols(); ++j)
        if (Z(i, j) != 0.0 && Z(i, j) != 1.0)
          throw std::invalid_argument("IsingData: entries must be 0/1");
    if (theta_star && theta_star->p != p())
      throw std::invalid_argument("IsingData: theta_star dimension mismatch");
  }
};

namespace detail {
inline void check_enum_guard(int p, int guard, const char* what) {
  if (p > guard)
    throw std::invalid_argument(std::string(what) +
                                ": p exceeds the 2^p enumeration guard; use Gibbs sampling");
  if (p < 1) throw std::invalid_argument(std::string(what) + ": p >= 1 required");
}

// Energies of all 2^p states, indexed by bitmask, via Gray-code single-bit
// updates (O(p) per state instead of O(p^2)).
inline std::vector<double> ising_energies(const IsingModel& m) {
  const int p = m.p;
  const std::size_t total = std::size_t{1} << p;
  std::vector<double> energy(total);
  std::vector<int> x(p, 0);
  Eigen::VectorXd field = Eigen::VectorXd::Zero(p);  // field_b = sum_{k on, k != b} theta_kb
  double e = 0.0;
  std::size_t prev_gray = 0;
  energy[0] = 0.0;
  for (std::size_t i = 1; i < total; ++i) {
    const std::size_t gray = i ^ (i >> 1);
    const std::size_t diff = gray ^ prev_gray;
    int b = 0;
    while (!((diff >> b) & 1u)) ++b;
    const double delta = m.theta(b, b) + field[b];  // field[b] never includes theta_bb
    if (x[b] == 0) {
      e += delta;
      x[b] = 1;
      for (int k = 0; k < p; ++k)
        if (k != b) field[k] += m.theta(b, k);
    } else {
      e -= delta;
      x[b] = 0;
      for (int k = 0; k < p; ++k)
        if (k != b) field[k] -= m.theta(b, k);
    }
    energy[gray] = e;
    prev_gray = gray;
  }
  return energy;
}
}  // namespace detail

// log Z_theta by exact enumeration with max-shift; p <= 20.
inline double log_partition(const IsingModel& m) {
  detail::check_enum_guard(m.p, kIsingEnumMax, "log_partition");
  const std::vector<double> energy = detail::ising_energies(m);
  const double mx = *std::max_element(energy.begin(), energy.end());
  double acc = 0.0;
  for (double e : energy) acc += std::exp(e - mx);
  return mx + std::log(acc);
}

inline double ising_energy(const IsingModel& m, const std::vector<int>& x) {
  if (static_cast<int>(x.size()) != m.p) throw std::invalid_argument("ising_energy: size mismatch");
  double e = 0.0;
  for (int j = 0; j < m.p; ++j) {
    if (!x[j]) continue;
    e += m.theta(j, j);
    for (int i = 0; i < j; ++i)
      if (x[i]) e += m.theta(i, j);
  }
  return e;
}

inline double ising_log_pmf(const IsingModel& m, const std::vector<int>& x) {
  return ising_energy(m, x) - log_partition(m);
}

// Precomputed 2^p table for repeated pmf evaluation and exact sampling.
struct IsingTable {
  int p = 0;
  double log_z = 0.0;
  std::vector<double> energy;  // indexed by bitmask, bit j = x_j

  explicit IsingTable(const IsingModel& m) : p(m.p) {
    detail::check_enum_guard(p, kIsingEnumMax, "IsingTable");
    energy = detail::ising_energies(m);
    const double mx = *std::max_element(energy.begin(), energy.end());
    double acc = 0.0;
    for (double e : energy) acc += std::exp(e - mx);
    log_z = mx + std::log(acc);
  }

  double log_pmf(std::size_t mask) const { return energy[mask] - log_z; }
};

// i.i.d. rows from f_theta by inverse CDF over the enumerated state table.
inline IsingData sample_ising_exact(const IsingModel& m, long n, Rng& rng) {
  IsingTable table(m);
  const std::size_t total = std::size_t{1} << m.p;
  std::vector<double> cum(total);
  double acc = 0.0;
  for (std::size_t s = 0; s < total; ++s) {
    acc += std::exp(table.log_pmf(s));
    cum[s] = acc;
  }
  const double z = cum.back();
  IsingData data;
  data.Z.resize(n, m.p);
  data.theta_star = m;
  for (long i = 0; i < n; ++i) {
    const double u = rng.uniform() * z;
    const std::size_t s = static_cast<std::size_t>(
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    for (int j = 0; j < m.p; ++j) data.Z(i, j) = static_cast<double>((s >> j) & 1u);
  }
  return data;
}

// Full conditional P(x_j = 1 | rest) = g'(theta_jj + sum_{k != j} theta_kj x_k).
inline double gibbs_conditional(const IsingModel& m, const std::vector<int>& x, int j) {
  double field = m.theta(j, j);
  for (int k = 0; k < m.p; ++k)
    if (k != j && x[k]) field += m.theta(k, j);
  return sigmoid(field);
}

// Single-site heat-bath sampler, systematic site ordering. Keeps one row every
// `thin` sweeps after `burnin` sweeps.
inline IsingData sample_ising_gibbs(const IsingModel& m, long n, long burnin, long thin,
                                    Rng& rng) {
  if (thin < 1 || burnin < 0 || n < 0)
    throw std::invalid_argument("sample_ising_gibbs: bad n/burnin/thin");
  std::vector<int> x(m.p);
  for (int j = 0; j < m.p; ++j) x[j] = rng.bernoulli(0.5) ? 1 : 0;
  const auto sweep = [&]() {
    for (int j = 0; j < m.p; ++j) x[j] = rng.bernoulli(gibbs_conditional(m, x, j)) ? 1 : 0;
  };
  for (long b = 0; b < burnin; ++b) sweep();
  IsingData data;
  data.Z.resize(n, m.p);
  data.theta_star = m;
  for (long i = 0; i < n; ++i) {
    for (long t = 0; t < thin; ++t) sweep();
    for (int j = 0; j < m.p; ++j) data.Z(i, j) = static_cast<double>(x[j]);
  }
  return data;
}

// Design matrix of the column-j conditional regression: Z with column j
// replaced by ones, so <theta_.j, Z_i(j)> = theta_jj + sum_{k != j} theta_kj Z_ik.
inline Eigen::MatrixXd design_for_column(const Eigen::MatrixXd& Z, int j) {
  Eigen::MatrixXd D = Z;
  D.col(j).setOnes();
  return D;
}

struct PseudoLogLik {
  double total = 0.0;
  Eigen::VectorXd per_column;
};

// Pseudo-likelihood of the unconstrained matrix parameter: the product over
// columns of the logistic likelihood of Z_.j on Z^{(j)}.
inline PseudoLogLik pseudo_log_likelihood(const MatrixParam& theta, const IsingData& data) {
  if (theta.p != data.p()) throw std::invalid_argument("pseudo_log_likelihood: dim mismatch");
  const int p = data.p();
  const long n = data.n();
  PseudoLogLik out;
  out.per_column.resize(p);
  for (int j = 0; j < p; ++j) {
    const SparseParam& col = theta.columns[j];
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < col.values.size(); ++k) {
      const int idx = col.pattern.active[k];
      if (idx == j) eta.array() += col.values[k];
      else eta.noalias() += col.values[k] * data.Z.col(idx);
    }
    double ll = 0.0;
    for (long i = 0; i < n; ++i) ll += data.Z(i, j) * eta[i] - log1pexp(eta[i]);
    out.per_column[j] = ll;
    out.total += ll;
  }
  return out;
}

// H^{(j)} = E[g''(<theta*_.j, X_(j)>) X_(j) X_(j)'] under f_theta*, exactly by
// 2^p enumeration; p <= 12.
inline Eigen::MatrixXd population_fisher(const IsingModel& m, int j) {
  detail::check_enum_guard(m.p, kIsingExpectMax, "population_fisher");
  if (j < 0 || j >= m.p) throw std::invalid_argument("population_fisher: bad column");
  IsingTable table(m);
  const int p = m.p;
  const std::size_t total = std::size_t{1} << p;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xj(p);
  for (std::size_t s = 0; s < total; ++s) {
    for (int k = 0; k < p; ++k) xj[k] = static_cast<double>((s >> k) & 1u);
    xj[j] = 1.0;
    const double eta = m.theta.col(j).dot(xj);
    const double w = std::exp(table.log_pmf(s)) * logistic_link(eta).g2;
    H.noalias() += w * (xj * xj.transpose());
  }
  return (H + H.transpose()) / 2.0;  // enforce exact symmetry
}

struct Kappa2 {
  Eigen::VectorXd sparse_per_column;  // restricted_eig_sparse of H^{(j)}
  Eigen::VectorXd cone_per_column;    // restricted_eig_cone estimate per column
  Eigen::VectorXd cone_certificates;  // lambda_min(H^{(j)})
  double sparse_min = 0.0;            // kappa_2(s)
  double cone_min = 0.0;              // kappa_2 (estimate)
  double cone_certificate_min = 0.0;
};

// kappa_2(s) and kappa_2 over the factor-7 compatibility cones, reusing the
// logistic-module eigensolvers on the population Fisher matrices.
inline Kappa2 kappa2_quantities(const IsingModel& m, int s, double factor = 7.0) {
  const int p = m.p;
  Kappa2 out;
  out.sparse_per_column.resize(p);
  out.cone_per_column.resize(p);
  out.cone_certificates.resize(p);
  for (int j = 0; j < p; ++j) {
    const Eigen::MatrixXd H = population_fisher(m, j);
    out.sparse_per_column[j] = restricted_eig_sparse(H, s, EigMode::Min);
    const ConeEig ce = restricted_eig_cone(H, m.column_pattern(j), factor);
    out.cone_per_column[j] = ce.estimate;
    out.cone_certificates[j] = ce.certificate;
  }
  out.sparse_min = out.sparse_per_column.minCoeff();
  out.cone_min = out.cone_per_column.minCoeff();
  out.cone_certificate_min = out.cone_certificates.minCoeff();
  return out;
}

struct ZetaIsing {
  double zeta = 0.0;
  int s_bar = 0;  // ceil(s*_j + zeta_j)
};

// zeta_j = s*_j + 4/c4 + (2/c4)(1 + 128/kappa2 + s*_j/(64 log(p)^2)
//          + log(4e)/log(p)) s*_j
inline ZetaIsing zeta_ising(int s_star_j, double c4, int p, double kappa2_cone) {
  if (p < 2) throw std::invalid_argument("zeta_ising: p >= 2 required");
  if (c4 <= 0.0) throw std::invalid_argument("zeta_ising: c4 > 0 required");
  if (kappa2_cone <= 0.0)
    throw std::invalid_argument("zeta_ising: kappa2 <= 0 signals a degenerate model");
  if (s_star_j < 0) throw std::invalid_argument("zeta_ising: s*_j >= 0 required");
  const double lp = std::log(static_cast<double>(p));
  const double inner = 1.0 + 128.0 / kappa2_cone + s_star_j / (64.0 * lp * lp) +
                       std::log(4.0 * std::exp(1.0)) / lp;
  ZetaIsing z;
  z.zeta = s_star_j + 4.0 / c4 + (2.0 / c4) * inner * s_star_j;
  z.s_bar = static_cast<int>(std::ceil(s_star_j + z.zeta));
  return z;
}

struct IsingRadii {
  double frobenius = 0.0;  // M0/kappa * sqrt(sum_j s_bar_j log(p)/n)
  double tnorm = 0.0;      // M0/kappa * sqrt(max_j s_bar_j log(p)/n)
};

inline IsingRadii contraction_radii_ising(double M0, double kappa_sbar,
                                          const std::vector<int>& s_bar, int p, long n) {
  if (M0 <= 0.0 || kappa_sbar <= 0.0 || p < 2 || n < 1 || s_bar.empty())
    throw std::invalid_argument("contraction_radii_ising: positive inputs required");
  double sum = 0.0;
  int mx = 0;
  for (int s : s_bar) {
    if (s < 0) throw std::invalid_argument("contraction_radii_ising: s_bar_j >= 0 required");
    sum += s;
    mx = std::max(mx, s);
  }
  const double lp = std::log(static_cast<double>(p));
  IsingRadii out;
  out.frobenius = M0 / kappa_sbar * std::sqrt(sum * lp / static_cast<double>(n));
  out.tnorm = M0 / kappa_sbar * std::sqrt(mx * lp / static_cast<double>(n));
  return out;
}

enum class SymmetrizeRule { Average, MinMagnitude, MaxMagnitude };

// Posterior point summaries need not be symmetric; these are the standard
// post-processing repairs.
inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m, SymmetrizeRule rule) {
  if (m.rows() != m.cols()) throw std::invalid_argument("symmetrize: square matrix required");
  Eigen::MatrixXd out = m;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = i + 1; j < m.cols(); ++j) {
      const double a = m(i, j), b = m(j, i);
      double v;
      switch (rule) {
        case SymmetrizeRule::Average: v = 0.5 * (a + b); break;
        case SymmetrizeRule::MinMagnitude: v = std::abs(a) <= std::abs(b) ? a : b; break;
        case SymmetrizeRule::MaxMagnitude: v = std::abs(a) >= std::abs(b) ? a : b; break;
        default: v = 0.5 * (a + b);
      }
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

}  // namespace qpost

#endif  // QPOST_ISING_HPP
