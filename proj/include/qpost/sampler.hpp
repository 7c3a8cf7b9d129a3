#ifndef QPOST_SAMPLER_HPP
#define QPOST_SAMPLER_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpost/core.hpp"
#include "qpost/ising.hpp"
#include "qpost/logistic.hpp"
#include "qpost/math.hpp"
#include "qpost/parallel.hpp"
#include "qpost/prior.hpp"
#include "qpost/rng.hpp"

namespace qpost {

struct ChainConfig {
  long iterations = 100000;
  double p_flip = 0.5;      // probability of a support-flip move
  double rw_scale = 0.5;    // within-model random-walk step size
  bool adapt = true;        // Robbins-Monro rescaling toward 0.3 acceptance
  std::uint64_t seed = 0;
  long burnin = 0;          // iterations discarded before retention
  long thin = 1;            // keep every thin-th post-burnin iteration
  bool store_draws = true;

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("ChainConfig: iterations >= 1");
    if (!(p_flip > 0.0 && p_flip < 1.0))
      throw std::invalid_argument("ChainConfig: p_flip in (0,1)");
    if (rw_scale <= 0.0) throw std::invalid_argument("ChainConfig: rw_scale > 0");
    if (burnin < 0 || burnin >= iterations)
      throw std::invalid_argument("ChainConfig: 0 <= burnin < iterations");
    if (thin < 1) throw std::invalid_argument("ChainConfig: thin >= 1");
  }
};

struct Draw {
  long iter = 0;
  SparseParam theta;
};

struct EventEstimate {
  double estimate = 0.0;
  double se = 0.0;
};

struct PosteriorSummary {
  int d = 0;
  long retained = 0;
  Eigen::VectorXd inclusion_probs;
  std::vector<double> support_size_histogram;  // counts (MCMC) or weights (oracle)
  Eigen::VectorXd mean;      // E[theta_j]
  Eigen::VectorXd mean_abs;  // E[|theta_j|]
  double mean_support_size = 0.0;
  double accept_rate_birth = 0.0;
  double accept_rate_death = 0.0;
  double accept_rate_walk = 0.0;
  double final_rw_scale = 0.0;
  std::map<std::string, EventEstimate> event_estimates;
  std::vector<Draw> draws;
};

// Quasi-likelihood model interface used by the chain: the logistic model keeps
// the linear predictor cached so single-coordinate moves cost O(n).
class LogisticModel {
 public:
  LogisticModel(Eigen::MatrixXd X, Eigen::VectorXd y) : X_(std::move(X)), y_(std::move(y)) {
    if (y_.size() != X_.rows()) throw std::invalid_argument("LogisticModel: X/y size mismatch");
  }
  explicit LogisticModel(const LogisticData& data) : LogisticModel(data.X, data.y) {}

  int dim() const { return static_cast<int>(X_.cols()); }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& y() const { return y_; }

  struct State {
    SparseParam theta;
    Eigen::VectorXd eta;
    Eigen::VectorXd eta_prop;
    double ll = 0.0;
  };

  State make_state(const SparseParam& theta) const {
    if (theta.dim() != dim()) throw std::invalid_argument("LogisticModel: theta dim mismatch");
    State s;
    s.theta = theta;
    s.eta = detail::linear_predictor(X_, theta);
    s.eta_prop = s.eta;
    s.ll = detail::loglik_from_eta(y_, s.eta);
    if (!std::isfinite(s.ll))
      throw std::invalid_argument("LogisticModel: non-finite likelihood at init");
    return s;
  }

  double loglik_dense(const Eigen::VectorXd& theta) const {
    return detail::loglik_from_eta(y_, X_ * theta);
  }

  // new log-likelihood with coordinate j set to v; eta_prop holds the proposal
  double propose_set(State& s, int j, double v) const {
    const double delta = v - s.theta[j];
    s.eta_prop = s.eta + delta * X_.col(j);
    return detail::loglik_from_eta(y_, s.eta_prop);
  }

  // new log-likelihood with all active values replaced (same support)
  double propose_values(State& s, const std::vector<double>& vals) const {
    s.eta_prop = s.eta;
    for (std::size_t k = 0; k < vals.size(); ++k)
      s.eta_prop.noalias() +=
          (vals[k] - s.theta.values[k]) * X_.col(s.theta.pattern.active[k]);
    return detail::loglik_from_eta(y_, s.eta_prop);
  }

  void accept_set(State& s, int j, double v, double new_ll) const {
    s.theta.set(j, v);
    s.eta.swap(s.eta_prop);
    s.ll = new_ll;
  }

  void accept_values(State& s, const std::vector<double>& vals, double new_ll) const {
    s.theta.values = vals;
    s.eta.swap(s.eta_prop);
    s.ll = new_ll;
  }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
};

// log q == 0 everywhere; the chain then samples the prior (used for prior
// recovery checks).
class FlatModel {
 public:
  explicit FlatModel(int d) : d_(d) {}
  int dim() const { return d_; }

  struct State {
    SparseParam theta;
    double ll = 0.0;
  };

  State make_state(const SparseParam& theta) const {
    if (theta.dim() != d_) throw std::invalid_argument("FlatModel: theta dim mismatch");
    return State{theta, 0.0};
  }
  double loglik_dense(const Eigen::VectorXd&) const { return 0.0; }
  double propose_set(State&, int, double) const { return 0.0; }
  double propose_values(State&, const std::vector<double>&) const { return 0.0; }
  void accept_set(State& s, int j, double v, double) const { s.theta.set(j, v); }
  void accept_values(State& s, const std::vector<double>& vals, double) const {
    s.theta.values = vals;
  }

 private:
  int d_;
};

namespace detail {
// Flip-move log acceptance ratio. The birth proposal draws the new value from
// the prior slab Laplace(rho), so the slab density and the (rho/2) mixture
// factor cancel and the trans-dimensional ratio reduces to the support-weight
// ratio times the likelihood ratio. The same cancellation applies to deaths.
inline double flip_log_accept(double log_pi_new, double log_pi_old, double ll_new,
                              double ll_old) {
  if (log_pi_new == -kInf) return -kInf;
  return (log_pi_new - log_pi_old) + (ll_new - ll_old);
}

// Within-model move: spherical Gaussian on the active values, Metropolis
// correction includes the Laplace slab through the l1 difference.
inline double walk_log_accept(double ll_new, double ll_old, double l1_new, double l1_old,
                              double rho) {
  return (ll_new - ll_old) - rho * (l1_new - l1_old);
}
}  // namespace detail

// Trans-dimensional Metropolis-Hastings targeting the quasi-posterior
// q(theta) pi_delta (rho/2)^{|delta|} e^{-rho ||theta||_1}. Moves:
//   flip (prob p_flip): toggle one uniformly chosen coordinate; births draw
//     the value from the prior slab, deaths zero it.
//   walk: spherical Gaussian step on the active values.
// The step-size adaptation is diminishing (step_t ~ 1/sqrt(t)), which keeps
// the invariant distribution exact in the limit.
template <class Model>
PosteriorSummary run_chain(const Model& model, const PriorSpec& prior,
                           const ChainConfig& cfg, const SparseParam& init) {
  cfg.validate();
  const int d = model.dim();
  if (prior.d() != d) throw std::invalid_argument("run_chain: prior dimension mismatch");
  if (init.dim() != d) throw std::invalid_argument("run_chain: init dimension mismatch");

  std::vector<double> log_pi(d + 1);
  for (int s = 0; s <= d; ++s) log_pi[s] = prior.log_pattern_weight(s);

  Rng rng(cfg.seed);
  typename Model::State state = model.make_state(init.normalized());
  double log_scale = std::log(cfg.rw_scale);

  long births = 0, birth_acc = 0, deaths = 0, death_acc = 0, walks = 0, walk_acc = 0;
  long n_walk_adapt = 0;

  PosteriorSummary out;
  out.d = d;
  out.inclusion_probs = Eigen::VectorXd::Zero(d);
  out.mean = Eigen::VectorXd::Zero(d);
  out.mean_abs = Eigen::VectorXd::Zero(d);
  out.support_size_histogram.assign(d + 1, 0.0);

  std::vector<double> prop_vals;
  const double rho = prior.rho();

  for (long t = 1; t <= cfg.iterations; ++t) {
    if (rng.uniform() < cfg.p_flip) {
      const int j = rng.uniform_int(d);
      const int s = state.theta.support_size();
      const bool is_birth = !state.theta.pattern.contains(j);
      const double v = is_birth ? rng.laplace(rho) : 0.0;
      const int s_new = is_birth ? s + 1 : s - 1;
      const double ll_new = model.propose_set(state, j, v);
      const double la =
          detail::flip_log_accept(log_pi[s_new], log_pi[s], ll_new, state.ll);
      (is_birth ? births : deaths) += 1;
      if (std::log(rng.uniform()) < la) {
        model.accept_set(state, j, v, ll_new);
        (is_birth ? birth_acc : death_acc) += 1;
      }
    } else {
      const std::size_t k = state.theta.values.size();
      if (k > 0) {
        const double scale = std::exp(log_scale);
        prop_vals.resize(k);
        double l1_new = 0.0, l1_old = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          prop_vals[i] = state.theta.values[i] + scale * rng.normal();
          l1_new += std::abs(prop_vals[i]);
          l1_old += std::abs(state.theta.values[i]);
        }
        const double ll_new = model.propose_values(state, prop_vals);
        const double la = detail::walk_log_accept(ll_new, state.ll, l1_new, l1_old, rho);
        walks += 1;
        if (std::log(rng.uniform()) < la) {
          model.accept_values(state, prop_vals, ll_new);
          walk_acc += 1;
        }
        if (cfg.adapt) {
          n_walk_adapt += 1;
          const double acc_prob = std::exp(std::min(0.0, la));
          log_scale += (acc_prob - 0.3) / std::sqrt(static_cast<double>(n_walk_adapt));
          log_scale = std::clamp(log_scale, std::log(1e-8), std::log(1e8));
        }
      }
    }

    if (t > cfg.burnin && (t - cfg.burnin) % cfg.thin == 0) {
      out.retained += 1;
      const SparseParam& th = state.theta;
      out.support_size_histogram[th.support_size()] += 1.0;
      for (std::size_t i = 0; i < th.values.size(); ++i) {
        const int j = th.pattern.active[i];
        out.inclusion_probs[j] += 1.0;
        out.mean[j] += th.values[i];
        out.mean_abs[j] += std::abs(th.values[i]);
      }
      out.mean_support_size += th.support_size();
      if (cfg.store_draws) out.draws.push_back(Draw{t, th});
    }
  }

  const double r = static_cast<double>(std::max<long>(out.retained, 1));
  out.inclusion_probs /= r;
  out.mean /= r;
  out.mean_abs /= r;
  out.mean_support_size /= r;
  out.accept_rate_birth = births > 0 ? static_cast<double>(birth_acc) / births : 0.0;
  out.accept_rate_death = deaths > 0 ? static_cast<double>(death_acc) / deaths : 0.0;
  out.accept_rate_walk = walks > 0 ? static_cast<double>(walk_acc) / walks : 0.0;
  out.final_rw_scale = std::exp(log_scale);
  return out;
}

// Monte Carlo probability of a predicate over the retained draws.
inline EventEstimate event_probability(const PosteriorSummary& summary,
                                       const std::function<bool(const SparseParam&)>& event) {
  if (summary.draws.empty())
    throw std::invalid_argument("event_probability: summary retains no draws");
  double hits = 0.0;
  for (const auto& dr : summary.draws)
    if (event(dr.theta)) hits += 1.0;
  const double n = static_cast<double>(summary.draws.size());
  EventEstimate e;
  e.estimate = hits / n;
  e.se = std::sqrt(std::max(e.estimate * (1.0 - e.estimate), 0.0) / n);
  return e;
}

// One conditional logistic model per Ising column: response Z_.j on Z^{(j)}.
inline LogisticModel ising_column_model(const IsingData& data, int j) {
  return LogisticModel(design_for_column(data.Z, j), data.Z.col(j));
}

inline std::uint64_t ising_column_seed(std::uint64_t master, int j) {
  return split_seed(master, static_cast<std::uint64_t>(j));
}

struct IsingPosterior {
  std::vector<PosteriorSummary> columns;
  Eigen::MatrixXd inclusion;  // (k,j): P(theta_kj != 0)
  Eigen::MatrixXd mean;       // posterior mean, unsymmetrized
  std::map<std::string, EventEstimate> event_estimates;
};

struct IsingFitOptions {
  std::vector<double> frobenius_radii;  // events ||theta - theta*||_F > r
  std::vector<double> tnorm_radii;      // events tnorm(theta - theta*) > r
  int workers = 1;
};

// p independent per-column chains; the quasi-posterior factorizes across
// columns so the joint assembly is definitionally the product of the column
// posteriors. Seeds are split per column, so running columns concurrently (or
// standalone) reproduces identical chains.
inline IsingPosterior run_ising_columns(const IsingData& data, const PriorSpec& prior,
                                        const ChainConfig& cfg,
                                        const IsingFitOptions& opts = {}) {
  data.validate();
  const int p = data.p();
  if (prior.d() != p) throw std::invalid_argument("run_ising_columns: prior dim mismatch");
  IsingPosterior out;
  out.columns.resize(p);
  parallel_for(p, opts.workers, [&](int j) {
    ChainConfig col_cfg = cfg;
    col_cfg.seed = ising_column_seed(cfg.seed, j);
    const LogisticModel model = ising_column_model(data, j);
    out.columns[j] = run_chain(model, prior, col_cfg, SparseParam::zero(p));
  });
  out.inclusion.resize(p, p);
  out.mean.resize(p, p);
  for (int j = 0; j < p; ++j) {
    out.inclusion.col(j) = out.columns[j].inclusion_probs;
    out.mean.col(j) = out.columns[j].mean;
  }

  const bool need_events =
      data.theta_star && (!opts.frobenius_radii.empty() || !opts.tnorm_radii.empty());
  if (need_events) {
    const long T = out.columns[0].retained;
    for (const auto& c : out.columns)
      if (c.retained != T || static_cast<long>(c.draws.size()) != T)
        throw std::invalid_argument(
            "run_ising_columns: event estimates need stored draws of equal length");
    const Eigen::MatrixXd ts = data.theta_star->theta;
    std::vector<double> frob(T), tn(T);
    Eigen::VectorXd coldist(p);
    for (long t = 0; t < T; ++t) {
      for (int j = 0; j < p; ++j) {
        const Eigen::VectorXd diff = out.columns[j].draws[t].theta.dense() - ts.col(j);
        coldist[j] = diff.norm();
      }
      frob[t] = coldist.norm();
      tn[t] = coldist.maxCoeff();
    }
    const auto tail_prob = [&](const std::vector<double>& v, double r) {
      double hits = 0.0;
      for (double x : v)
        if (x > r) hits += 1.0;
      EventEstimate e;
      e.estimate = hits / static_cast<double>(T);
      e.se = std::sqrt(std::max(e.estimate * (1.0 - e.estimate), 0.0) / static_cast<double>(T));
      return e;
    };
    for (double r : opts.frobenius_radii)
      out.event_estimates["frobenius_gt_" + std::to_string(r)] = tail_prob(frob, r);
    for (double r : opts.tnorm_radii)
      out.event_estimates["tnorm_gt_" + std::to_string(r)] = tail_prob(tn, r);
  }
  return out;
}

}  // namespace qpost

#endif  // QPOST_SAMPLER_HPP
