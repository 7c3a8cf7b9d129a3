#ifndef QPOST_EXPERIMENT_HPP
#define QPOST_EXPERIMENT_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpost/io.hpp"
#include "qpost/oracle.hpp"
#include "qpost/parallel.hpp"
#include "qpost/prior.hpp"
#include "qpost/sampler.hpp"
#include "qpost/theory.hpp"
#include "qpost/verify.hpp"

namespace qpost {

// Configuration problems carry the offending field so the CLI can report
// field-level messages and exit with the validation status.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

namespace detail {
inline const json& require_field(const json& j, const std::string& key,
                                 const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + key, "required field missing");
  return j.at(key);
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

inline void set_default(json& j, const std::string& key, const json& value) {
  if (!j.contains(key)) j[key] = value;
}
}  // namespace detail

struct ExperimentConfig {
  std::string task;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int workers = 0;  // 0 -> QPOST_WORKERS or 1
  json resolved;    // full config with defaults applied; echoed in reports

  static const std::vector<std::string>& known_tasks() {
    static const std::vector<std::string> tasks = {
        "gen-logistic", "gen-ising", "fit", "oracle", "bounds", "verify", "rate-study"};
    return tasks;
  }
};

// Parses and validates the experiment configuration, applying defaults so the
// resolved form round-trips: parse(emit(parse(c))) == parse(c). The seed is
// mandatory; there is no ambient randomness anywhere downstream.
inline ExperimentConfig parse_config(json j) {
  ExperimentConfig cfg;
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  cfg.task = detail::require_field(j, "task", "").get<std::string>();
  const auto& tasks = ExperimentConfig::known_tasks();
  if (std::find(tasks.begin(), tasks.end(), cfg.task) == tasks.end())
    throw ConfigError("task", "unknown task '" + cfg.task + "'");
  if (!j.contains("seed")) throw ConfigError("seed", "required field missing");
  if (!j.at("seed").is_number_integer() && !j.at("seed").is_number_unsigned())
    throw ConfigError("seed", "must be an integer");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  detail::set_default(j, "out", ".");
  detail::set_default(j, "workers", 0);
  cfg.out_dir = j.at("out").get<std::string>();
  cfg.workers = j.at("workers").get<int>();
  if (cfg.workers < 0) throw ConfigError("workers", "must be >= 0");

  const auto need_block = [&](const char* name) -> json& {
    if (!j.contains(name))
      throw ConfigError(name, std::string("task '") + cfg.task + "' needs this block");
    if (!j.at(name).is_object()) throw ConfigError(name, "must be an object");
    return j.at(name);
  };

  if (cfg.task == "gen-logistic" || cfg.task == "gen-ising") {
    json& m = need_block("model");
    if (cfg.task == "gen-logistic") {
      if (detail::get_or<long>(m, "n", 0) < 1) throw ConfigError("model.n", "must be >= 1");
      if (detail::get_or<int>(m, "d", 0) < 2) throw ConfigError("model.d", "must be >= 2");
      detail::set_default(m, "design", "rademacher");
      const std::string design = m.at("design").get<std::string>();
      if (design != "rademacher" && design != "gaussian")
        throw ConfigError("model.design", "must be rademacher or gaussian");
      detail::set_default(m, "theta_star", json::object());
      json& ts = m.at("theta_star");
      detail::set_default(ts, "indices", json::array());
      detail::set_default(ts, "values", json::array());
      if (ts.at("indices").size() != ts.at("values").size())
        throw ConfigError("model.theta_star", "indices/values length mismatch");
    } else {
      if (detail::get_or<long>(m, "n", 0) < 1) throw ConfigError("model.n", "must be >= 1");
      if (detail::get_or<int>(m, "p", 0) < 2) throw ConfigError("model.p", "must be >= 2");
      detail::set_default(m, "sampler", detail::get_or<int>(m, "p", 2) <= kIsingEnumMax
                                            ? "exact"
                                            : "gibbs");
      const std::string s = m.at("sampler").get<std::string>();
      if (s != "exact" && s != "gibbs")
        throw ConfigError("model.sampler", "must be exact or gibbs");
      detail::set_default(m, "gibbs_burnin", 1000);
      detail::set_default(m, "gibbs_thin", 5);
      detail::set_default(m, "edges", json::array());
      detail::set_default(m, "diagonal", 0.0);
    }
  }

  if (cfg.task == "fit" || cfg.task == "oracle") {
    json& m = need_block("model");
    const std::string kind =
        detail::require_field(m, "kind", "model.").get<std::string>();
    if (kind != "logistic" && kind != "ising")
      throw ConfigError("model.kind", "must be logistic or ising");
    if (cfg.task == "oracle" && kind != "logistic")
      throw ConfigError("model.kind", "the oracle task supports logistic models only");
    detail::require_field(m, "data", "model.");
  }

  if (cfg.task == "fit" || cfg.task == "oracle" || cfg.task == "rate-study") {
    json& p = need_block("prior");
    detail::set_default(p, "support_law", "beta_binomial");
    const std::string law = p.at("support_law").get<std::string>();
    if (law == "beta_binomial") {
      detail::set_default(p, "u", 2.0);
      if (p.at("u").get<double>() <= 1.0)
        throw ConfigError("prior.u", "beta-binomial needs u > 1");
    } else if (law == "explicit") {
      if (!p.contains("g") || !p.at("g").is_array() || p.at("g").empty())
        throw ConfigError("prior.g", "explicit law needs a nonempty g array");
    } else {
      throw ConfigError("prior.support_law", "must be beta_binomial or explicit");
    }
    detail::set_default(p, "rho", "auto_logistic");
    detail::set_default(p, "rho_scale", 1.0);
    if (p.at("rho_scale").get<double>() <= 0.0)
      throw ConfigError("prior.rho_scale", "must be > 0");
    const json& rho = p.at("rho");
    if (rho.is_string()) {
      const std::string r = rho.get<std::string>();
      if (r != "auto_logistic" && r != "auto_ising")
        throw ConfigError("prior.rho", "must be auto_logistic, auto_ising, or a number");
    } else if (!rho.is_number() || rho.get<double>() <= 0.0) {
      throw ConfigError("prior.rho", "must be a positive number or an auto rule");
    }
  }

  if (cfg.task == "fit" || cfg.task == "rate-study") {
    json& s = need_block("sampler");
    detail::set_default(s, "iterations", 100000L);
    detail::set_default(s, "p_flip", 0.5);
    detail::set_default(s, "rw_scale", 0.5);
    detail::set_default(s, "adapt", true);
    detail::set_default(s, "burnin", s.at("iterations").get<long>() / 5);
    detail::set_default(s, "thin", 1L);
    detail::set_default(s, "store_draws", true);
    ChainConfig probe;
    probe.iterations = s.at("iterations").get<long>();
    probe.p_flip = s.at("p_flip").get<double>();
    probe.rw_scale = s.at("rw_scale").get<double>();
    probe.burnin = s.at("burnin").get<long>();
    probe.thin = s.at("thin").get<long>();
    try {
      probe.validate();
    } catch (const std::exception& e) {
      throw ConfigError("sampler", e.what());
    }
  }

  if (cfg.task == "fit") {
    json& f = j.contains("fit") ? j.at("fit") : (j["fit"] = json::object());
    detail::set_default(f, "symmetrize", "average");
    const std::string rule = f.at("symmetrize").get<std::string>();
    if (rule != "average" && rule != "min_magnitude" && rule != "max_magnitude")
      throw ConfigError("fit.symmetrize", "must be average, min_magnitude, or max_magnitude");
    detail::set_default(f, "frobenius_radii", json::array());
    detail::set_default(f, "tnorm_radii", json::array());
  }

  if (cfg.task == "oracle") {
    json& o = j.contains("oracle") ? j.at("oracle") : (j["oracle"] = json::object());
    detail::set_default(o, "half_width", 0.0);
    detail::set_default(o, "points", 201);
    detail::set_default(o, "dist_radii", json::array());
    if (o.at("points").get<int>() < 2) throw ConfigError("oracle.points", "must be >= 2");
  }

  if (cfg.task == "bounds") {
    json& b = need_block("bounds");
    if (!b.contains("logistic") && !b.contains("ising") && !b.contains("thm2_part1") &&
        !b.contains("thm2_part2"))
      throw ConfigError("bounds", "needs at least one of logistic/ising/thm2_part1/thm2_part2");
  }

  if (cfg.task == "rate-study") {
    json& r = need_block("rate_study");
    if (!r.contains("n_grid") || !r.at("n_grid").is_array() || r.at("n_grid").size() < 1)
      throw ConfigError("rate_study.n_grid", "needs an array of sample sizes");
    if (detail::get_or<int>(r, "d", 0) < 2) throw ConfigError("rate_study.d", "must be >= 2");
    if (detail::get_or<int>(r, "s_star", -1) < 0)
      throw ConfigError("rate_study.s_star", "must be >= 0");
    detail::set_default(r, "replications", 20);
    if (r.at("replications").get<int>() < 1)
      throw ConfigError("rate_study.replications", "must be >= 1");
    detail::set_default(r, "signal", 1.0);
    detail::set_default(r, "zeta_prime", static_cast<double>(
                                             r.at("s_star").get<int>() + 4));
  }

  if (cfg.task == "verify") {
    json& v = j.contains("verify") ? j.at("verify") : (j["verify"] = json::object());
    detail::set_default(v, "quick", false);
  }

  cfg.resolved = std::move(j);
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  return parse_config(read_json(path));
}

namespace detail {
// Written files are tracked so a failing task can clean up its partial output.
class OutputTracker {
 public:
  explicit OutputTracker(const std::string& dir) : dir_(dir) {
    std::filesystem::create_directories(dir_);
  }
  std::string path(const std::string& name) {
    const std::string p = (std::filesystem::path(dir_) / name).string();
    written_.push_back(p);
    return p;
  }
  void cleanup() {
    for (const auto& p : written_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
  }

 private:
  std::string dir_;
  std::vector<std::string> written_;
};

inline PriorSpec prior_from_config(const json& p, int d, double x_inf, long n) {
  double rho;
  const json& r = p.at("rho");
  if (r.is_string()) {
    // rho_scale multiplies the advisory selector; the paper's prefactors can
    // put the empty support past the l1 entry threshold at desk-scale n
    const std::string rule = r.get<std::string>();
    rho = rule == "auto_logistic" ? select_rho_logistic(x_inf, n, d)
                                  : select_rho_ising(n, d);
    rho *= detail::get_or<double>(p, "rho_scale", 1.0);
  } else {
    rho = r.get<double>();
  }
  if (p.at("support_law").get<std::string>() == "beta_binomial")
    return PriorSpec::beta_binomial(d, p.at("u").get<double>(), rho);
  return PriorSpec::explicit_law(d, p.at("g").get<std::vector<double>>(), rho);
}

inline ChainConfig chain_from_config(const json& s, std::uint64_t seed) {
  ChainConfig cfg;
  cfg.iterations = s.at("iterations").get<long>();
  cfg.p_flip = s.at("p_flip").get<double>();
  cfg.rw_scale = s.at("rw_scale").get<double>();
  cfg.adapt = s.at("adapt").get<bool>();
  cfg.burnin = s.at("burnin").get<long>();
  cfg.thin = s.at("thin").get<long>();
  cfg.store_draws = s.at("store_draws").get<bool>();
  cfg.seed = seed;
  return cfg;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// rate-study

struct RateStudyCellSummary {
  long n = 0;
  int rep = 0;
  double median_err = 0.0;        // posterior median of ||theta - theta*||_2
  double p_size_ge_zeta = 0.0;    // P(||theta||_0 >= zeta')
  double mean_support_size = 0.0;
  double rho = 0.0;
};

struct RateStudyResult {
  std::vector<long> n_grid;
  int d = 0;
  int s_star = 0;
  int replications = 0;
  std::vector<std::vector<RateStudyCellSummary>> cells;  // [n index][rep]
  std::vector<double> median_err_per_n;                  // median over reps
  bool slope_valid = false;
  double slope = 0.0;
  double slope_se = 0.0;
  double slope_ci_lo = 0.0;
  double slope_ci_hi = 0.0;
};

namespace detail {
inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 == 1 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// 97.5% Student-t quantiles for small residual degrees of freedom.
inline double t_975(int df) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365,
                                 2.306,  2.262, 2.228, 2.201, 2.179, 2.160, 2.145,
                                 2.131,  2.120, 2.110, 2.101, 2.093, 2.086};
  if (df < 1) return kInf;
  if (df <= 20) return table[df - 1];
  return 1.96;
}
}  // namespace detail

// Simulation study of the l2 contraction rate: for each n in the grid,
// `replications` fresh datasets are fitted and the posterior median error is
// summarized; the log-log slope of median error against n estimates the rate
// exponent (theory: -1/2). Per-task seeds come from the documented splitting
// rule (stream = cell * replications + rep), so the worker count never
// changes any number.
inline RateStudyResult rate_study(const ExperimentConfig& cfg) {
  const json& r = cfg.resolved.at("rate_study");
  const json& prior_block = cfg.resolved.at("prior");
  const json& sampler_block = cfg.resolved.at("sampler");
  RateStudyResult out;
  out.n_grid = r.at("n_grid").get<std::vector<long>>();
  out.d = r.at("d").get<int>();
  out.s_star = r.at("s_star").get<int>();
  out.replications = r.at("replications").get<int>();
  const double signal = r.at("signal").get<double>();
  const double zeta_prime = r.at("zeta_prime").get<double>();
  const int n_cells = static_cast<int>(out.n_grid.size());
  out.cells.assign(n_cells, std::vector<RateStudyCellSummary>(out.replications));

  const int total = n_cells * out.replications;
  parallel_for(total, cfg.workers, [&](int t) {
    const int cell = t / out.replications;
    const int rep = t % out.replications;
    const long n = out.n_grid[cell];
    Rng rng(split_seed(cfg.seed, static_cast<std::uint64_t>(t)));

    Eigen::MatrixXd X = rademacher_design(n, out.d, rng);
    SparseParam star = SparseParam::zero(out.d);
    for (int j = 0; j < out.s_star; ++j)
      star.set(j, (j % 2 == 0 ? 1.0 : -1.0) * signal);
    LogisticData data = generate_logistic_data(star, X, rng);

    const PriorSpec prior = detail::prior_from_config(prior_block, out.d, 1.0, n);
    ChainConfig chain = detail::chain_from_config(sampler_block, rng.next_u64());
    chain.store_draws = true;
    const PosteriorSummary sm =
        run_chain(LogisticModel(data.X, data.y), prior, chain, SparseParam::zero(out.d));

    const Eigen::VectorXd star_dense = star.dense();
    std::vector<double> dist;
    dist.reserve(sm.draws.size());
    long big = 0;
    for (const auto& dr : sm.draws) {
      dist.push_back((dr.theta.dense() - star_dense).norm());
      if (dr.theta.support_size() >= zeta_prime) ++big;
    }
    RateStudyCellSummary& c = out.cells[cell][rep];
    c.n = n;
    c.rep = rep;
    c.median_err = detail::median_of(dist);
    c.p_size_ge_zeta = sm.retained > 0 ? static_cast<double>(big) / sm.retained : 0.0;
    c.mean_support_size = sm.mean_support_size;
    c.rho = prior.rho();
  });

  out.median_err_per_n.resize(n_cells);
  for (int i = 0; i < n_cells; ++i) {
    std::vector<double> meds;
    for (const auto& c : out.cells[i]) meds.push_back(c.median_err);
    out.median_err_per_n[i] = detail::median_of(meds);
  }

  if (n_cells >= 3) {
    std::vector<double> x(n_cells), y(n_cells);
    for (int i = 0; i < n_cells; ++i) {
      x[i] = std::log(static_cast<double>(out.n_grid[i]));
      y[i] = std::log(std::max(out.median_err_per_n[i], 1e-300));
    }
    double xm = 0.0, ym = 0.0;
    for (int i = 0; i < n_cells; ++i) {
      xm += x[i];
      ym += y[i];
    }
    xm /= n_cells;
    ym /= n_cells;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n_cells; ++i) {
      sxx += (x[i] - xm) * (x[i] - xm);
      sxy += (x[i] - xm) * (y[i] - ym);
    }
    out.slope = sxy / sxx;
    const double intercept = ym - out.slope * xm;
    double rss = 0.0;
    for (int i = 0; i < n_cells; ++i) {
      const double e = y[i] - intercept - out.slope * x[i];
      rss += e * e;
    }
    const int df = n_cells - 2;
    out.slope_se = df > 0 ? std::sqrt(rss / df / sxx) : kInf;
    const double t = detail::t_975(df);
    out.slope_ci_lo = out.slope - t * out.slope_se;
    out.slope_ci_hi = out.slope + t * out.slope_se;
    out.slope_valid = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// bounds

// Evaluates every requested theorem constant in log scale where it explodes,
// echoing all inputs (provenance rule: no bound without its inputs).
inline json evaluate_bounds(const json& b) {
  json rep;
  if (b.contains("logistic")) {
    const json& l = b.at("logistic");
    json out;
    out["inputs"] = l;
    const auto z = zeta_logistic(l.at("s_star").get<int>(), l.at("c4").get<double>(),
                                 l.at("d").get<int>(), l.at("x_inf").get<double>(),
                                 l.at("kappa1_cone").get<double>(),
                                 l.at("kappa_bar_sstar").get<double>());
    out["zeta"] = z.zeta;
    out["s_bar"] = z.s_bar;
    if (l.contains("M0") && l.contains("kappa_sbar") && l.contains("n")) {
      const int s_bar = l.contains("s_bar") ? l.at("s_bar").get<int>() : z.s_bar;
      out["radius_l2"] = contraction_radius_logistic(
          l.at("M0").get<double>(), l.at("x_inf").get<double>(),
          l.at("kappa_sbar").get<double>(), s_bar, l.at("d").get<int>(),
          l.at("n").get<long>());
      out["s_bar_used"] = s_bar;
      if (l.contains("lq")) {
        json lq = json::object();
        for (double q : l.at("lq").get<std::vector<double>>())
          lq[std::to_string(q)] =
              lq_radius(q, out["radius_l2"].get<double>(), s_bar);
        out["radius_lq"] = lq;
      }
    }
    if (l.contains("rho_auto_n"))
      out["rho_auto"] = select_rho_logistic(l.at("x_inf").get<double>(),
                                            l.at("rho_auto_n").get<long>(),
                                            l.at("d").get<int>());
    rep["logistic"] = out;
  }
  if (b.contains("ising")) {
    const json& is = b.at("ising");
    json out;
    out["inputs"] = is;
    const auto s_star_j = is.at("s_star_j").get<std::vector<int>>();
    const double c4 = is.at("c4").get<double>();
    const int p = is.at("p").get<int>();
    const double kappa2 = is.at("kappa2_cone").get<double>();
    json zetas = json::array();
    std::vector<int> s_bars;
    for (int s : s_star_j) {
      const auto z = zeta_ising(s, c4, p, kappa2);
      zetas.push_back({{"s_star_j", s}, {"zeta_j", z.zeta}, {"s_bar_j", z.s_bar}});
      s_bars.push_back(z.s_bar);
    }
    out["per_column"] = zetas;
    out["s_bar"] = *std::max_element(s_bars.begin(), s_bars.end());
    if (is.contains("M0") && is.contains("kappa2_sbar") && is.contains("n")) {
      const auto radii = contraction_radii_ising(
          is.at("M0").get<double>(), is.at("kappa2_sbar").get<double>(), s_bars, p,
          is.at("n").get<long>());
      out["radius_frobenius"] = radii.frobenius;
      out["radius_tnorm"] = radii.tnorm;
    }
    if (is.contains("rho_auto_n"))
      out["rho_auto"] = select_rho_ising(is.at("rho_auto_n").get<long>(), p);
    rep["ising"] = out;
  }
  if (b.contains("thm2_part1")) {
    const json& t = b.at("thm2_part1");
    json out;
    out["inputs"] = t;
    const RateFunction r(t.at("rate_tau").get<double>(), t.at("rate_b").get<double>());
    json per_k = json::array();
    for (int k : t.at("k_values").get<std::vector<int>>()) {
      const auto v = thm2_part1_rhs(
          k, t.at("s_star").get<int>(), t.at("d").get<int>(), t.at("rho").get<double>(),
          t.at("L_bar").get<double>(), r, t.at("c2").get<double>(),
          t.at("c4").get<double>(), t.at("n_empty").get<bool>());
      per_k.push_back({{"k", k},
                       {"log_bound", v.log_bound},
                       {"a", v.a},
                       {"hypothesis_ok", v.hypothesis_ok}});
    }
    out["per_k"] = per_k;
    rep["thm2_part1"] = out;
  }
  if (b.contains("thm2_part2")) {
    const json& t = b.at("thm2_part2");
    json out;
    out["inputs"] = t;
    const RateFunction r(t.at("rate_tau").get<double>(), t.at("rate_b").get<double>());
    double eps_bar;
    if (t.contains("eps_bar")) {
      eps_bar = t.at("eps_bar").get<double>();
    } else {
      eps_bar = phi_r(r, 2.0 * t.at("lambda_bar").get<double>());
      out["eps_bar_from_phi_r"] = eps_bar;
    }
    const int s_bar = t.at("s_bar").get<int>();
    const double cap = packing_bound_log(t.at("d").get<int>(), s_bar);
    const auto v = thm2_part2_terms(
        t.at("M0").get<double>(), eps_bar, r, t.at("rho").get<double>(),
        t.at("c0").get<double>(), t.at("s_star").get<int>(), t.at("d").get<int>(),
        t.at("c1").get<double>(), t.at("c3").get<double>(), t.at("L_bar").get<double>(),
        detail::get_or<int>(t, "j_max", 10000), cap);
    out["log_packing_cap"] = cap;
    out["log_series1"] = v.log_series1;
    out["log_series2"] = v.log_series2;
    out["tail1_reliable"] = v.tail1_reliable;
    out["tail2_reliable"] = v.tail2_reliable;
    out["j_max"] = v.j_max;
    rep["thm2_part2"] = out;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// task driver

namespace detail {
// Builds a symmetric Ising parameter from an {edges, diagonal} block.
inline IsingModel ising_star_from_config(const json& m, int p) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(p, p);
  const json diagonal = m.contains("diagonal") ? m.at("diagonal") : json(0.0);
  if (diagonal.is_number()) {
    for (int j = 0; j < p; ++j) t(j, j) = diagonal.get<double>();
  } else {
    const auto dv = diagonal.get<std::vector<double>>();
    if (static_cast<int>(dv.size()) != p)
      throw ConfigError("model.diagonal", "length must equal p");
    for (int j = 0; j < p; ++j) t(j, j) = dv[j];
  }
  const json edges = m.contains("edges") ? m.at("edges") : json::array();
  for (const auto& e : edges) {
    if (!e.is_array() || e.size() != 3)
      throw ConfigError("model.edges", "each edge is [i, j, weight], 1-based");
    const int i = e[0].get<int>() - 1;
    const int jj = e[1].get<int>() - 1;
    if (i < 0 || jj < 0 || i >= p || jj >= p || i == jj)
      throw ConfigError("model.edges", "edge endpoints out of range");
    t(i, jj) = e[2].get<double>();
    t(jj, i) = e[2].get<double>();
  }
  return IsingModel(t);
}

inline json rate_study_to_json(const RateStudyResult& r) {
  json cells = json::array();
  for (const auto& per_n : r.cells)
    for (const auto& c : per_n)
      cells.push_back({{"n", c.n},
                       {"rep", c.rep},
                       {"median_err", c.median_err},
                       {"p_size_ge_zeta", c.p_size_ge_zeta},
                       {"mean_support_size", c.mean_support_size},
                       {"rho", c.rho}});
  json out;
  out["cells"] = cells;
  out["n_grid"] = r.n_grid;
  out["median_err_per_n"] = r.median_err_per_n;
  out["slope_valid"] = r.slope_valid;
  if (r.slope_valid) {
    out["slope"] = r.slope;
    out["slope_se"] = r.slope_se;
    out["slope_ci"] = {r.slope_ci_lo, r.slope_ci_hi};
  }
  return out;
}
}  // namespace detail

struct ExperimentResult {
  int exit_code = 0;  // 0 ok, 3 verify-suite failure
  json report;
};

// Executes one task: deterministic under the configured seed, every report
// embeds the fully resolved config, and partial outputs are removed when the
// task fails.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  detail::OutputTracker out(cfg.out_dir);
  ExperimentResult result;
  json report;
  report["config"] = cfg.resolved;
  try {
    if (cfg.task == "gen-logistic") {
      const json& m = cfg.resolved.at("model");
      const long n = m.at("n").get<long>();
      const int d = m.at("d").get<int>();
      Rng rng(cfg.seed);
      Eigen::MatrixXd X = m.at("design").get<std::string>() == "rademacher"
                              ? rademacher_design(n, d, rng)
                              : gaussian_design(n, d, rng);
      SparseParam star = SparseParam::zero(d);
      const auto idx = m.at("theta_star").at("indices").get<std::vector<int>>();
      const auto val = m.at("theta_star").at("values").get<std::vector<double>>();
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 1 || idx[k] > d)
          throw ConfigError("model.theta_star.indices", "1-based index out of range");
        star.set(idx[k] - 1, val[k]);
      }
      LogisticData data = generate_logistic_data(star, X, rng);
      write_logistic_data(out.path("dataset.tsv"), data);
      report["x_inf"] = X.cwiseAbs().maxCoeff();
      report["rho_auto_logistic"] = select_rho_logistic(X.cwiseAbs().maxCoeff(), n, d);
      report["dataset"] = "dataset.tsv";
    } else if (cfg.task == "gen-ising") {
      const json& m = cfg.resolved.at("model");
      const long n = m.at("n").get<long>();
      const IsingModel star = detail::ising_star_from_config(m, m.at("p").get<int>());
      Rng rng(cfg.seed);
      IsingData data = m.at("sampler").get<std::string>() == "exact"
                           ? sample_ising_exact(star, n, rng)
                           : sample_ising_gibbs(star, n, m.at("gibbs_burnin").get<long>(),
                                                m.at("gibbs_thin").get<long>(), rng);
      write_ising_data(out.path("dataset.tsv"), data);
      report["rho_auto_ising"] = select_rho_ising(n, star.p);
      report["dataset"] = "dataset.tsv";
    } else if (cfg.task == "fit") {
      const json& m = cfg.resolved.at("model");
      const json& sampler_block = cfg.resolved.at("sampler");
      if (m.at("kind").get<std::string>() == "logistic") {
        LogisticData data = read_logistic_data(
            m.at("data").get<std::string>(),
            detail::get_or<std::string>(m, "responses", ""));
        const PriorSpec prior = detail::prior_from_config(
            cfg.resolved.at("prior"), data.d(), data.X.cwiseAbs().maxCoeff(), data.n());
        const ChainConfig chain = detail::chain_from_config(sampler_block, cfg.seed);
        const PosteriorSummary sm = run_chain(LogisticModel(data.X, data.y), prior,
                                              chain, SparseParam::zero(data.d()));
        write_draw_store(out.path("draws.tsv"), sm);
        report["rho"] = prior.rho();
        report["summary"] = summary_to_json(sm);
        {
          auto f = detail::open_out(out.path("summary.tsv"));
          f << "# coordinate\tinclusion_prob\tposterior_mean\tposterior_mean_abs\n";
          for (int j = 0; j < sm.d; ++j)
            f << j + 1 << "\t" << sm.inclusion_probs[j] << "\t" << sm.mean[j] << "\t"
              << sm.mean_abs[j] << "\n";
        }
      } else {
        IsingData data = read_ising_data(m.at("data").get<std::string>());
        if (m.contains("theta_star"))
          data.theta_star = detail::ising_star_from_config(m.at("theta_star"), data.p());
        const PriorSpec prior = detail::prior_from_config(cfg.resolved.at("prior"),
                                                          data.p(), 1.0, data.n());
        const ChainConfig chain = detail::chain_from_config(sampler_block, cfg.seed);
        const json& f = cfg.resolved.at("fit");
        IsingFitOptions opts;
        opts.workers = cfg.workers;
        opts.frobenius_radii = f.at("frobenius_radii").get<std::vector<double>>();
        opts.tnorm_radii = f.at("tnorm_radii").get<std::vector<double>>();
        const IsingPosterior post = run_ising_columns(data, prior, chain, opts);
        const std::string rule_name = f.at("symmetrize").get<std::string>();
        const SymmetrizeRule rule = rule_name == "average" ? SymmetrizeRule::Average
                                    : rule_name == "min_magnitude"
                                        ? SymmetrizeRule::MinMagnitude
                                        : SymmetrizeRule::MaxMagnitude;
        write_edge_list(out.path("edges.tsv"), symmetrize(post.mean, rule),
                        symmetrize(post.inclusion, SymmetrizeRule::Average));
        for (int j = 0; j < data.p(); ++j)
          write_draw_store(out.path("draws_col" + std::to_string(j + 1) + ".tsv"),
                           post.columns[j]);
        report["rho"] = prior.rho();
        json cols = json::array();
        for (const auto& c : post.columns) cols.push_back(summary_to_json(c));
        report["columns"] = cols;
        json ev = json::object();
        for (const auto& [name, e] : post.event_estimates)
          ev[name] = {{"estimate", e.estimate}, {"se", e.se}};
        report["event_estimates"] = ev;
      }
    } else if (cfg.task == "oracle") {
      const json& m = cfg.resolved.at("model");
      LogisticData data = read_logistic_data(
          m.at("data").get<std::string>(),
          detail::get_or<std::string>(m, "responses", ""));
      const PriorSpec prior = detail::prior_from_config(
          cfg.resolved.at("prior"), data.d(), data.X.cwiseAbs().maxCoeff(), data.n());
      const json& o = cfg.resolved.at("oracle");
      OracleConfig oc;
      oc.half_width = o.at("half_width").get<double>();
      oc.points = o.at("points").get<int>();
      oc.workers = cfg.workers;
      std::vector<OracleEvent> events;
      if (m.contains("theta_star_indices")) {
        SparseParam star = SparseParam::zero(data.d());
        const auto idx = m.at("theta_star_indices").get<std::vector<int>>();
        const auto val = m.at("theta_star_values").get<std::vector<double>>();
        for (std::size_t k = 0; k < idx.size(); ++k) star.set(idx[k] - 1, val[k]);
        const Eigen::VectorXd sd = star.dense();
        for (double rr : o.at("dist_radii").get<std::vector<double>>())
          events.push_back(OracleEvent{"dist_gt_" + std::to_string(rr),
                                       [sd, rr](const Eigen::VectorXd& th) {
                                         return (th - sd).norm() > rr;
                                       }});
      }
      const OraclePosterior op =
          exact_posterior_oracle(LogisticModel(data.X, data.y), prior, oc, events);
      report["rho"] = prior.rho();
      report["summary"] = summary_to_json(op.summary);
      report["log_normalizer"] = op.log_normalizer;
      report["boundary_mass_fraction"] = op.boundary_mass_fraction;
      json sup = json::array();
      for (const auto& sw : op.supports) {
        std::vector<int> one_based;
        for (int j : sw.pattern.active) one_based.push_back(j + 1);
        sup.push_back({{"active", one_based}, {"prob", sw.posterior_prob}});
      }
      report["supports"] = sup;
    } else if (cfg.task == "bounds") {
      report["bounds"] = evaluate_bounds(cfg.resolved.at("bounds"));
    } else if (cfg.task == "rate-study") {
      const RateStudyResult r = rate_study(cfg);
      report["rate_study"] = detail::rate_study_to_json(r);
      auto f = detail::open_out(out.path("cells.tsv"));
      f << "# n\trep\tmedian_err\tp_size_ge_zeta\tmean_support_size\trho\n";
      for (const auto& per_n : r.cells)
        for (const auto& c : per_n)
          f << c.n << "\t" << c.rep << "\t" << c.median_err << "\t" << c.p_size_ge_zeta
            << "\t" << c.mean_support_size << "\t" << c.rho << "\n";
    } else if (cfg.task == "verify") {
      json vrep;
      const bool pass = run_verify_suite(
          cfg.seed, cfg.resolved.at("verify").at("quick").get<bool>(), &vrep);
      report["verify"] = vrep;
      result.exit_code = pass ? 0 : 3;
    }
    result.report = report;
    write_json(out.path("report.json"), report);
  } catch (...) {
    out.cleanup();
    throw;
  }
  return result;
}

}  // namespace qpost

#endif  // QPOST_EXPERIMENT_HPP
