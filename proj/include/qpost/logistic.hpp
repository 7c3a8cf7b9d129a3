#ifndef QPOST_LOGISTIC_HPP
#define QPOST_LOGISTIC_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qpost/core.hpp"
#include "qpost/math.hpp"
#include "qpost/rng.hpp"
#include "qpost/theory.hpp"

namespace qpost {

struct LinkValue {
  double g, g1, g2;  // log(1+e^x), sigmoid, sigmoid * (1 - sigmoid)
};

inline LinkValue logistic_link(double x) {
  const double s = sigmoid(x);
  return LinkValue{log1pexp(x), s, s * sigmoid(-x)};
}

struct LogisticData {
  Eigen::MatrixXd X;  // n x d design
  Eigen::VectorXd y;  // n binary responses
  std::optional<SparseParam> theta_star;

  long n() const { return X.rows(); }
  int d() const { return static_cast<int>(X.cols()); }

  void validate() const {
    if (y.size() != X.rows()) throw std::invalid_argument("LogisticData: X/y size mismatch");
    for (long i = 0; i < y.size(); ++i)
      if (y[i] != 0.0 && y[i] != 1.0)
        throw std::invalid_argument("LogisticData: responses must be 0/1");
    if (theta_star && theta_star->dim() != d())
      throw std::invalid_argument("LogisticData: theta_star dimension mismatch");
  }
};

namespace detail {
inline Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& X, const SparseParam& theta) {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(X.rows());
  for (std::size_t k = 0; k < theta.values.size(); ++k)
    eta.noalias() += theta.values[k] * X.col(theta.pattern.active[k]);
  return eta;
}

inline double loglik_from_eta(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (long i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1pexp(eta[i]);
  return ll;
}
}  // namespace detail

// sum_i z_i <x_i, theta> - g(<x_i, theta>)
inline double log_quasi_likelihood(const SparseParam& theta, const LogisticData& data) {
  if (theta.dim() != data.d()) throw std::invalid_argument("log_quasi_likelihood: dim mismatch");
  return detail::loglik_from_eta(data.y, detail::linear_predictor(data.X, theta));
}

// grad_j = sum_i (z_i - g'(<x_i, theta>)) X_ij
inline Eigen::VectorXd grad_log_quasi_likelihood(const SparseParam& theta,
                                                 const LogisticData& data) {
  if (theta.dim() != data.d()) throw std::invalid_argument("grad_log_quasi_likelihood: dim mismatch");
  const Eigen::VectorXd eta = detail::linear_predictor(data.X, theta);
  Eigen::VectorXd resid(eta.size());
  for (long i = 0; i < eta.size(); ++i) resid[i] = data.y[i] - sigmoid(eta[i]);
  return data.X.transpose() * resid;
}

// Bregman divergence L_{n,theta} = log q(theta) - log q(theta*) - <grad(theta*), theta - theta*>.
// Data-free for this model; always <= 0 by concavity.
inline double bregman_divergence(const SparseParam& theta, const SparseParam& theta_star,
                                 const LogisticData& data) {
  if (theta.dim() != data.d() || theta_star.dim() != data.d())
    throw std::invalid_argument("bregman_divergence: dim mismatch");
  const Eigen::VectorXd eta = detail::linear_predictor(data.X, theta);
  const Eigen::VectorXd eta_star = detail::linear_predictor(data.X, theta_star);
  double L = 0.0;
  for (long i = 0; i < eta.size(); ++i) {
    L -= log1pexp(eta[i]) - log1pexp(eta_star[i]) -
         sigmoid(eta_star[i]) * (eta[i] - eta_star[i]);
  }
  return L;
}

struct CurvatureSummary {
  double x_inf = 0.0;       // max |X_ij|
  Eigen::VectorXd w_diag;   // W_i = g''(<x_i, theta*>), in (0, 1/4]
  Eigen::MatrixXd fisher;   // X' W X / n
  Eigen::MatrixXd gram;     // X' X / n
};

inline CurvatureSummary curvature_summary(const LogisticData& data) {
  if (!data.theta_star)
    throw std::invalid_argument("curvature_summary: theta_star required");
  CurvatureSummary cs;
  const long n = data.n();
  cs.x_inf = data.X.cwiseAbs().maxCoeff();
  const Eigen::VectorXd eta = detail::linear_predictor(data.X, *data.theta_star);
  cs.w_diag.resize(n);
  for (long i = 0; i < n; ++i) cs.w_diag[i] = logistic_link(eta[i]).g2;
  cs.fisher = data.X.transpose() * cs.w_diag.asDiagonal() * data.X / static_cast<double>(n);
  cs.gram = data.X.transpose() * data.X / static_cast<double>(n);
  return cs;
}

enum class EigMode { Min, Max };

// Exact restricted eigenvalue over supports of size s: min over size-s
// supports of lambda_min(M_SS) (Min), or max of lambda_max(M_SS) (Max). Both
// equal the inf/sup of the Rayleigh quotient over {1 <= ||theta||_0 <= s} by
// eigenvalue interlacing. Guarded by C(d,s) <= 1e6.
inline double restricted_eig_sparse(const Eigen::MatrixXd& M, int s, EigMode mode) {
  const int d = static_cast<int>(M.rows());
  if (M.cols() != d) throw std::invalid_argument("restricted_eig_sparse: square matrix required");
  if (s < 1 || s > d) throw std::invalid_argument("restricted_eig_sparse: 1 <= s <= d required");
  if (lchoose(d, s) > std::log(1e6))
    throw std::invalid_argument(
        "restricted_eig_sparse: C(d,s) > 1e6; use the certificate lambda_min bound instead");
  std::vector<int> S(s);
  for (int k = 0; k < s; ++k) S[k] = k;
  Eigen::MatrixXd sub(s, s);
  double best = (mode == EigMode::Min) ? kInf : -kInf;
  while (true) {
    for (int a = 0; a < s; ++a)
      for (int b = 0; b < s; ++b) sub(a, b) = M(S[a], S[b]);
    if (s == 1) {
      const double v = sub(0, 0);
      best = (mode == EigMode::Min) ? std::min(best, v) : std::max(best, v);
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub, Eigen::EigenvaluesOnly);
      const auto& ev = es.eigenvalues();
      best = (mode == EigMode::Min) ? std::min(best, ev[0])
                                    : std::max(best, ev[s - 1]);
    }
    // next size-s combination
    int k = s - 1;
    while (k >= 0 && S[k] == d - s + k) --k;
    if (k < 0) break;
    ++S[k];
    for (int t = k + 1; t < s; ++t) S[t] = S[t - 1] + 1;
  }
  return best;
}

struct ConeEig {
  double estimate = 0.0;     // best Rayleigh value found on the cone
  double certificate = 0.0;  // lambda_min(M), always a valid lower bound
};

namespace detail {
// Euclidean projection onto {u : sum_off |u_j| <= c * sum_on |u_j|}. Off-cone
// points get off-support magnitudes soft-thresholded by mu and on-support
// magnitudes grown by c*mu, with mu solving the active constraint by bisection.
inline Eigen::VectorXd project_n_cone(const Eigen::VectorXd& v,
                                      const std::vector<bool>& on, double c) {
  double sum_on = 0.0, sum_off = 0.0, max_off = 0.0;
  for (int j = 0; j < v.size(); ++j) {
    const double a = std::abs(v[j]);
    if (on[j]) sum_on += a;
    else {
      sum_off += a;
      max_off = std::max(max_off, a);
    }
  }
  if (sum_off <= c * sum_on) return v;
  const double n_on = static_cast<double>(std::count(on.begin(), on.end(), true));
  const auto slack = [&](double mu) {
    double s_off = 0.0;
    for (int j = 0; j < v.size(); ++j)
      if (!on[j]) s_off += std::max(std::abs(v[j]) - mu, 0.0);
    return s_off - c * (sum_on + c * mu * n_on);
  };
  double lo = 0.0, hi = max_off;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (slack(mid) > 0.0) lo = mid;
    else hi = mid;
  }
  const double mu = 0.5 * (lo + hi);
  Eigen::VectorXd u(v.size());
  for (int j = 0; j < v.size(); ++j) {
    if (on[j]) {
      const double sgn = v[j] < 0.0 ? -1.0 : 1.0;  // grow zeros positive
      u[j] = sgn * (std::abs(v[j]) + c * mu);
    } else {
      u[j] = (v[j] > 0.0 ? 1.0 : -1.0) * std::max(std::abs(v[j]) - mu, 0.0);
    }
  }
  return u;
}
}  // namespace detail

// Restricted eigenvalue over the compatibility cone
// {u != 0 : sum_{delta*_j=0} |u_j| <= factor * ||u . delta*||_1}: projected
// gradient on the Rayleigh quotient with random restarts. The paper gives no
// algorithm for this quantity; lambda_min(M) is reported alongside as the
// always-valid certificate. Empty delta* makes the cone empty (estimate +inf).
inline ConeEig restricted_eig_cone(const Eigen::MatrixXd& M,
                                   const SparsityPattern& delta_star,
                                   double factor = 7.0, int restarts = 32,
                                   std::uint64_t seed = 0x9d2c5680u) {
  const int d = static_cast<int>(M.rows());
  if (M.cols() != d) throw std::invalid_argument("restricted_eig_cone: square matrix required");
  if (delta_star.dim != d) throw std::invalid_argument("restricted_eig_cone: pattern dim mismatch");
  ConeEig out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  out.certificate = es.eigenvalues()[0];
  if (delta_star.size() == 0) {
    out.estimate = kInf;
    return out;
  }
  if (delta_star.size() == d) {
    out.estimate = out.certificate;  // constraint vacuous
    return out;
  }
  std::vector<bool> on(d, false);
  for (int j : delta_star.active) on[j] = true;

  const double lmax = es.eigenvalues()[d - 1];
  const double step = 0.45 / std::max(lmax - out.certificate, 1e-12);
  Rng rng(seed);
  double best = kInf;
  const auto rayleigh = [&](const Eigen::VectorXd& u) {
    return u.dot(M * u) / u.squaredNorm();
  };
  const auto run_from = [&](Eigen::VectorXd u) {
    u = detail::project_n_cone(u, on, factor);
    if (u.norm() == 0.0) return;
    u.normalize();
    double r = rayleigh(u);
    double eta = step;
    for (int it = 0; it < 600; ++it) {
      const Eigen::VectorXd grad = 2.0 * (M * u - r * u);
      bool moved = false;
      for (int bt = 0; bt < 40; ++bt) {
        Eigen::VectorXd cand = detail::project_n_cone(u - eta * grad, on, factor);
        const double nrm = cand.norm();
        if (nrm > 0.0) {
          cand /= nrm;
          const double rc = rayleigh(cand);
          if (rc < r) {
            const bool converged = r - rc < 1e-14 * (1.0 + std::abs(r));
            u = cand;
            r = rc;
            moved = !converged;
            break;
          }
        }
        eta *= 0.5;
      }
      if (!moved) break;
    }
    best = std::min(best, r);
  };

  // warm starts: bottom eigenvector and the on-support restriction of it
  run_from(es.eigenvectors().col(0));
  {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
    for (int j : delta_star.active) u[j] = es.eigenvectors().col(0)[j];
    if (u.norm() == 0.0)
      for (int j : delta_star.active) u[j] = 1.0;
    run_from(u);
  }
  for (int rs = 0; rs < restarts; ++rs) {
    Eigen::VectorXd u(d);
    for (int j = 0; j < d; ++j) u[j] = rng.normal();
    run_from(u);
  }
  out.estimate = std::max(best, out.certificate);
  return out;
}

struct ZetaLogistic {
  double zeta = 0.0;
  int s_bar = 0;  // ceil(s_star + zeta)
};

// zeta = s* + 2/c4 + (2/c4)(1 + 64 Xinf^2/kappa1 + kbar(s*)/(64 Xinf^2 log(d)^2)
//        + log(4e)/log(d)) s*
inline ZetaLogistic zeta_logistic(int s_star, double c4, int d, double x_inf,
                                  double kappa1_cone, double kappa_bar_sstar) {
  if (d < 2) throw std::invalid_argument("zeta_logistic: d >= 2 required");
  if (c4 <= 0.0) throw std::invalid_argument("zeta_logistic: c4 > 0 required");
  if (kappa1_cone <= 0.0)
    throw std::invalid_argument("zeta_logistic: kappa1 <= 0 signals a degenerate design");
  if (s_star < 0 || x_inf <= 0.0)
    throw std::invalid_argument("zeta_logistic: s* >= 0 and x_inf > 0 required");
  const double ld = std::log(static_cast<double>(d));
  const double xi2 = x_inf * x_inf;
  const double inner = 1.0 + 64.0 * xi2 / kappa1_cone +
                       kappa_bar_sstar / (64.0 * xi2 * ld * ld) +
                       std::log(4.0 * std::exp(1.0)) / ld;
  ZetaLogistic z;
  z.zeta = s_star + 2.0 / c4 + (2.0 / c4) * inner * s_star;
  z.s_bar = static_cast<int>(std::ceil(s_star + z.zeta));
  return z;
}

// Theorem-3 part-2 radius: M0 ||X||_inf / kappa1(s_bar) * sqrt(s_bar log(d) / n).
inline double contraction_radius_logistic(double M0, double x_inf, double kappa_sbar,
                                          int s_bar, int d, long n) {
  if (d < 2) throw std::invalid_argument("contraction_radius_logistic: d >= 2 required");
  if (M0 <= 0.0 || x_inf <= 0.0 || kappa_sbar <= 0.0 || s_bar < 1 || n < 1)
    throw std::invalid_argument("contraction_radius_logistic: positive inputs required");
  return M0 * x_inf / kappa_sbar *
         std::sqrt(s_bar * std::log(static_cast<double>(d)) / static_cast<double>(n));
}

// Holder lift of the l2 radius: ||.||_q <= ||.||_2 s_bar^{1/q - 1/2}, q in (0,2].
inline double lq_radius(double q, double l2_radius, int s_bar) {
  if (q <= 0.0 || q > 2.0) throw std::invalid_argument("lq_radius: q in (0,2] required");
  return l2_radius * std::pow(static_cast<double>(s_bar), 1.0 / q - 0.5);
}

inline LogisticData generate_logistic_data(const SparseParam& theta_star,
                                           const Eigen::MatrixXd& X, Rng& rng) {
  if (theta_star.dim() != X.cols())
    throw std::invalid_argument("generate_logistic_data: dim mismatch");
  LogisticData data;
  data.X = X;
  data.theta_star = theta_star;
  const Eigen::VectorXd eta = detail::linear_predictor(X, theta_star);
  data.y.resize(X.rows());
  for (long i = 0; i < X.rows(); ++i)
    data.y[i] = rng.bernoulli(sigmoid(eta[i])) ? 1.0 : 0.0;
  return data;
}

// i.i.d. Rademacher entries; ||X||_inf = 1 exactly, which keeps the rho
// selector free of design-dependent scale.
inline Eigen::MatrixXd rademacher_design(long n, int d, Rng& rng) {
  Eigen::MatrixXd X(n, d);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = rng.bernoulli(0.5) ? 1.0 : -1.0;
  return X;
}

inline Eigen::MatrixXd gaussian_design(long n, int d, Rng& rng) {
  Eigen::MatrixXd X(n, d);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = rng.normal();
  return X;
}

}  // namespace qpost

#endif  // QPOST_LOGISTIC_HPP
