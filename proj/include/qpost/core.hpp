#ifndef QPOST_CORE_HPP
#define QPOST_CORE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpost/math.hpp"

namespace qpost {

// Support pattern of a parameter vector. Indices are 0-based, sorted and
// unique. Zero is a structural state here, not a numeric one: a coordinate is
// in the support iff it carries an exactly nonzero value.
struct SparsityPattern {
  int dim = 0;
  std::vector<int> active;

  SparsityPattern() = default;
  SparsityPattern(int d, std::vector<int> idx) : dim(d), active(std::move(idx)) {
    std::sort(active.begin(), active.end());
    validate();
  }

  int size() const { return static_cast<int>(active.size()); }

  bool contains(int j) const {
    return std::binary_search(active.begin(), active.end(), j);
  }

  void validate() const {
    int prev = -1;
    for (int j : active) {
      if (j <= prev || j < 0 || j >= dim)
        throw std::invalid_argument("SparsityPattern: indices must be strictly increasing in [0,d)");
      prev = j;
    }
  }

  bool operator==(const SparsityPattern& o) const {
    return dim == o.dim && active == o.active;
  }
};

// Sparse parameter vector: pattern plus one value per active index. Off-support
// coordinates are exact zeros (never stored), which keeps the trans-dimensional
// bookkeeping unambiguous.
struct SparseParam {
  SparsityPattern pattern;
  std::vector<double> values;

  SparseParam() = default;
  SparseParam(SparsityPattern p, std::vector<double> v)
      : pattern(std::move(p)), values(std::move(v)) {
    if (values.size() != pattern.active.size())
      throw std::invalid_argument("SparseParam: values/pattern size mismatch");
  }

  static SparseParam zero(int d) {
    SparseParam t;
    t.pattern.dim = d;
    return t;
  }

  static SparseParam from_dense(const Eigen::VectorXd& x) {
    SparseParam t;
    t.pattern.dim = static_cast<int>(x.size());
    for (int j = 0; j < x.size(); ++j) {
      if (x[j] != 0.0) {
        t.pattern.active.push_back(j);
        t.values.push_back(x[j]);
      }
    }
    return t;
  }

  int dim() const { return pattern.dim; }
  int support_size() const { return pattern.size(); }

  double operator[](int j) const {
    const auto it = std::lower_bound(pattern.active.begin(), pattern.active.end(), j);
    if (it == pattern.active.end() || *it != j) return 0.0;
    return values[static_cast<std::size_t>(it - pattern.active.begin())];
  }

  // Set coordinate j; v == 0 removes it from the support.
  void set(int j, double v) {
    if (j < 0 || j >= pattern.dim) throw std::out_of_range("SparseParam::set");
    const auto it = std::lower_bound(pattern.active.begin(), pattern.active.end(), j);
    const auto pos = it - pattern.active.begin();
    const bool present = (it != pattern.active.end() && *it == j);
    if (v == 0.0) {
      if (present) {
        pattern.active.erase(it);
        values.erase(values.begin() + pos);
      }
    } else if (present) {
      values[static_cast<std::size_t>(pos)] = v;
    } else {
      pattern.active.insert(it, j);
      values.insert(values.begin() + pos, v);
    }
  }

  Eigen::VectorXd dense() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(pattern.dim);
    for (std::size_t k = 0; k < values.size(); ++k) x[pattern.active[k]] = values[k];
    return x;
  }

  // Drops stored entries whose value is exactly zero.
  SparseParam normalized() const {
    SparseParam t;
    t.pattern.dim = pattern.dim;
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (values[k] != 0.0) {
        t.pattern.active.push_back(pattern.active[k]);
        t.values.push_back(values[k]);
      }
    }
    return t;
  }

  bool operator==(const SparseParam& o) const {
    return pattern == o.pattern && values == o.values;
  }
};

// Column-sparse matrix parameter; columns are independent SparseParams of
// dimension p (the Ising quasi-posterior does not constrain symmetry).
struct MatrixParam {
  int p = 0;
  std::vector<SparseParam> columns;

  MatrixParam() = default;
  explicit MatrixParam(int p_) : p(p_), columns(p_, SparseParam::zero(p_)) {}

  static MatrixParam from_dense(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("MatrixParam: square matrix required");
    MatrixParam t(static_cast<int>(m.rows()));
    for (int j = 0; j < t.p; ++j) t.columns[j] = SparseParam::from_dense(m.col(j));
    return t;
  }

  void validate() const {
    for (const auto& c : columns)
      if (c.dim() != p) throw std::invalid_argument("MatrixParam: column dimension mismatch");
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
    for (int j = 0; j < p; ++j) m.col(j) = columns[j].dense();
    return m;
  }
};

struct Norms {
  double l0, l1, l2, linf;
};

inline Norms norms(const SparseParam& v) {
  Norms r{0.0, 0.0, 0.0, 0.0};
  double ss = 0.0;
  for (std::size_t k = 0; k < v.values.size(); ++k) {
    const double a = std::abs(v.values[k]);
    if (a > 0.0) r.l0 += 1.0;
    r.l1 += a;
    ss += a * a;
    r.linf = std::max(r.linf, a);
  }
  r.l2 = std::sqrt(ss);
  return r;
}

// Sparsity structure of v: exact nonzeros, no tolerance.
inline SparsityPattern sparsity_pattern(const SparseParam& v) {
  return v.normalized().pattern;
}

// max over columns of the Euclidean column norm.
inline double tnorm(const MatrixParam& m) {
  double t = 0.0;
  for (const auto& c : m.columns) t = std::max(t, norms(c).l2);
  return t;
}

// The five split-cone families used by the contraction analysis.
struct ConeSpec {
  enum class Kind { FullSpace, SSparse, PatternCone, NCone, ColumnSparse };

  Kind kind = Kind::FullSpace;
  int dim = 0;
  int s = 0;                       // SSparse
  SparsityPattern pattern;         // PatternCone / NCone
  double factor = 7.0;             // NCone
  std::vector<int> column_budgets; // ColumnSparse

  static ConeSpec full_space(int d) {
    ConeSpec c;
    c.kind = Kind::FullSpace;
    c.dim = d;
    return c;
  }
  static ConeSpec s_sparse(int d, int s) {
    if (s < 0 || s > d) throw std::invalid_argument("ConeSpec: s out of range");
    ConeSpec c;
    c.kind = Kind::SSparse;
    c.dim = d;
    c.s = s;
    return c;
  }
  static ConeSpec pattern_cone(SparsityPattern delta_star) {
    ConeSpec c;
    c.kind = Kind::PatternCone;
    c.dim = delta_star.dim;
    c.pattern = std::move(delta_star);
    return c;
  }
  static ConeSpec n_cone(SparsityPattern delta_star, double factor = 7.0) {
    ConeSpec c;
    c.kind = Kind::NCone;
    c.dim = delta_star.dim;
    c.pattern = std::move(delta_star);
    c.factor = factor;
    return c;
  }
  static ConeSpec column_sparse(std::vector<int> budgets) {
    ConeSpec c;
    c.kind = Kind::ColumnSparse;
    c.dim = static_cast<int>(budgets.size());
    c.column_budgets = std::move(budgets);
    return c;
  }
};

inline bool cone_contains(const ConeSpec& c, const SparseParam& v) {
  if (v.dim() != c.dim) throw std::invalid_argument("cone_contains: dimension mismatch");
  switch (c.kind) {
    case ConeSpec::Kind::FullSpace:
      return true;
    case ConeSpec::Kind::SSparse:
      return norms(v).l0 <= static_cast<double>(c.s);
    case ConeSpec::Kind::PatternCone: {
      for (std::size_t k = 0; k < v.values.size(); ++k)
        if (v.values[k] != 0.0 && !c.pattern.contains(v.pattern.active[k])) return false;
      return true;
    }
    case ConeSpec::Kind::NCone: {
      // {theta != 0, sum_{delta*_j = 0} |theta_j| <= factor * ||theta . delta*||_1}
      double on = 0.0, off = 0.0;
      bool nonzero = false;
      for (std::size_t k = 0; k < v.values.size(); ++k) {
        const double a = std::abs(v.values[k]);
        if (a > 0.0) nonzero = true;
        if (c.pattern.contains(v.pattern.active[k])) on += a;
        else off += a;
      }
      return nonzero && off <= c.factor * on;
    }
    case ConeSpec::Kind::ColumnSparse:
      throw std::invalid_argument("cone_contains: column-sparse cone applies to MatrixParam");
  }
  return false;
}

inline bool cone_contains(const ConeSpec& c, const MatrixParam& m) {
  if (c.kind != ConeSpec::Kind::ColumnSparse)
    throw std::invalid_argument("cone_contains(MatrixParam): column-sparse cone required");
  if (m.p != c.dim) throw std::invalid_argument("cone_contains: dimension mismatch");
  for (int j = 0; j < m.p; ++j)
    if (norms(m.columns[j]).l0 > static_cast<double>(c.column_budgets[j])) return false;
  return true;
}

}  // namespace qpost

#endif  // QPOST_CORE_HPP
