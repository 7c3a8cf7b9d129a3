#ifndef QPOST_IO_HPP
#define QPOST_IO_HPP

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpost/core.hpp"
#include "qpost/ising.hpp"
#include "qpost/logistic.hpp"
#include "qpost/sampler.hpp"

namespace qpost {

using json = nlohmann::json;

namespace detail {
inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << std::setprecision(17);
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return f;
}
}  // namespace detail

// Logistic dataset: header "n d", then n rows of d whitespace-separated design
// values with the 0/1 response as a trailing column.
inline void write_logistic_data(const std::string& path, const LogisticData& data) {
  auto f = detail::open_out(path);
  f << data.n() << " " << data.d() << "\n";
  for (long i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.d(); ++j) f << data.X(i, j) << " ";
    f << static_cast<int>(data.y[i]) << "\n";
  }
}

// Reads the trailing-column format; when `responses_path` is nonempty the main
// file holds the bare design and responses come one per line from that file.
inline LogisticData read_logistic_data(const std::string& path,
                                       const std::string& responses_path = "") {
  auto f = detail::open_in(path);
  long n = 0;
  int d = 0;
  if (!(f >> n >> d) || n < 0 || d < 1)
    throw std::runtime_error("bad dataset header in " + path);
  LogisticData data;
  data.X.resize(n, d);
  data.y.resize(n);
  const bool trailing = responses_path.empty();
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j)
      if (!(f >> data.X(i, j))) throw std::runtime_error("truncated design row in " + path);
    if (trailing && !(f >> data.y[i]))
      throw std::runtime_error("missing response in " + path);
  }
  if (!trailing) {
    auto r = detail::open_in(responses_path);
    for (long i = 0; i < n; ++i)
      if (!(r >> data.y[i])) throw std::runtime_error("truncated responses in " + responses_path);
  }
  data.validate();
  return data;
}

// Binary data matrix: header "n p", then n rows of p 0/1 entries.
inline void write_ising_data(const std::string& path, const IsingData& data) {
  auto f = detail::open_out(path);
  f << data.n() << " " << data.p() << "\n";
  for (long i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.p(); ++j)
      f << static_cast<int>(data.Z(i, j)) << (j + 1 < data.p() ? " " : "\n");
  }
}

inline IsingData read_ising_data(const std::string& path) {
  auto f = detail::open_in(path);
  long n = 0;
  int p = 0;
  if (!(f >> n >> p) || n < 0 || p < 1)
    throw std::runtime_error("bad dataset header in " + path);
  IsingData data;
  data.Z.resize(n, p);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j)
      if (!(f >> data.Z(i, j))) throw std::runtime_error("truncated row in " + path);
  data.validate();
  return data;
}

// Draw store: tab-delimited "iter  k  i1,i2,...  v1,v2,..." with 1-based
// indices and "-" for the empty support.
inline void write_draw_store(const std::string& path, const PosteriorSummary& summary) {
  auto f = detail::open_out(path);
  f << "# iter\tsupport_size\tactive_indices(1-based,csv)\tactive_values(csv)\n";
  for (const auto& dr : summary.draws) {
    f << dr.iter << "\t" << dr.theta.support_size() << "\t";
    if (dr.theta.support_size() == 0) {
      f << "-\t-\n";
      continue;
    }
    for (std::size_t k = 0; k < dr.theta.values.size(); ++k)
      f << dr.theta.pattern.active[k] + 1
        << (k + 1 < dr.theta.values.size() ? "," : "\t");
    for (std::size_t k = 0; k < dr.theta.values.size(); ++k)
      f << dr.theta.values[k] << (k + 1 < dr.theta.values.size() ? "," : "\n");
  }
}

inline std::vector<Draw> read_draw_store(const std::string& path, int d) {
  auto f = detail::open_in(path);
  std::string line;
  std::vector<Draw> draws;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Draw dr;
    int k = 0;
    std::string idx_field, val_field;
    if (!(ss >> dr.iter >> k >> idx_field >> val_field))
      throw std::runtime_error("bad draw-store line in " + path);
    std::vector<int> idx;
    std::vector<double> vals;
    if (k > 0) {
      std::istringstream is(idx_field), vs(val_field);
      std::string tok;
      while (std::getline(is, tok, ',')) idx.push_back(std::stoi(tok) - 1);
      while (std::getline(vs, tok, ',')) vals.push_back(std::stod(tok));
      if (static_cast<int>(idx.size()) != k || static_cast<int>(vals.size()) != k)
        throw std::runtime_error("inconsistent draw-store line in " + path);
    }
    dr.theta = SparseParam(SparsityPattern(d, idx), vals);
    draws.push_back(std::move(dr));
  }
  return draws;
}

// Edge list for graph fits: one line per unordered pair (1-based nodes).
inline void write_edge_list(const std::string& path, const Eigen::MatrixXd& weights,
                            const Eigen::MatrixXd& inclusion) {
  if (weights.rows() != weights.cols() || inclusion.rows() != weights.rows() ||
      inclusion.cols() != weights.cols())
    throw std::invalid_argument("write_edge_list: square matrices of equal size required");
  auto f = detail::open_out(path);
  f << "# i\tj\tweight\tposterior_inclusion_prob\n";
  for (int i = 0; i < weights.rows(); ++i)
    for (int j = i + 1; j < weights.cols(); ++j)
      f << i + 1 << "\t" << j + 1 << "\t" << weights(i, j) << "\t" << inclusion(i, j) << "\n";
}

inline json summary_to_json(const PosteriorSummary& s) {
  json j;
  j["d"] = s.d;
  j["retained"] = s.retained;
  j["inclusion_probs"] = std::vector<double>(s.inclusion_probs.data(),
                                             s.inclusion_probs.data() + s.inclusion_probs.size());
  j["support_size_histogram"] = s.support_size_histogram;
  j["mean"] = std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size());
  j["mean_abs"] = std::vector<double>(s.mean_abs.data(), s.mean_abs.data() + s.mean_abs.size());
  j["mean_support_size"] = s.mean_support_size;
  j["accept_rate_birth"] = s.accept_rate_birth;
  j["accept_rate_death"] = s.accept_rate_death;
  j["accept_rate_walk"] = s.accept_rate_walk;
  j["final_rw_scale"] = s.final_rw_scale;
  json ev = json::object();
  for (const auto& [name, e] : s.event_estimates)
    ev[name] = {{"estimate", e.estimate}, {"se", e.se}};
  j["event_estimates"] = ev;
  return j;
}

inline void write_json(const std::string& path, const json& j) {
  auto f = detail::open_out(path);
  f << j.dump(2) << "\n";
}

inline json read_json(const std::string& path) {
  auto f = detail::open_in(path);
  json j;
  f >> j;
  return j;
}

}  // namespace qpost

#endif  // QPOST_IO_HPP
