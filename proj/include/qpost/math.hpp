#ifndef QPOST_MATH_HPP
#define QPOST_MATH_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace qpost {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// log(1 + e^x), stable over the whole double range.
inline double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Logistic sigmoid, stable for large |x|.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double lchoose(double n, double k) {
  if (k < 0.0 || k > n) return -kInf;
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
  static const double inv_sqrt2 = 0.7071067811865475244;
  return 0.5 * std::erfc(-x * inv_sqrt2);
}

// Upper tail 1 - Phi(x) without the cancellation of the naive difference.
inline double normal_sf(double x) {
  static const double inv_sqrt2 = 0.7071067811865475244;
  return 0.5 * std::erfc(x * inv_sqrt2);
}

// Streaming log(sum(exp(x_i))) without storing the terms.
class OnlineLogSumExp {
 public:
  void add(double x) {
    if (x == -kInf) return;
    if (n_ == 0 || x > max_) {
      if (n_ > 0) sum_ = sum_ * std::exp(max_ - x) + 1.0;
      else sum_ = 1.0;
      max_ = x;
    } else {
      sum_ += std::exp(x - max_);
    }
    ++n_;
  }
  double value() const {
    if (n_ == 0) return -kInf;
    return max_ + std::log(sum_);
  }
  long count() const { return n_; }

 private:
  double max_ = -kInf;
  double sum_ = 0.0;
  long n_ = 0;
};

// Golden-section minimization of a unimodal f on [lo, hi].
inline double golden_section_min(const std::function<double(double)>& f,
                                 double lo, double hi, double tol = 1e-13,
                                 int max_iter = 400) {
  static const double phi = 0.6180339887498948482;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < max_iter && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  const double xm = 0.5 * (a + b);
  return std::min({f(xm), f1, f2});
}

// Smallest x in [lo, hi] with pred(x) true; pred must be monotone false->true.
inline double bisect_threshold(const std::function<bool(double)>& pred,
                               double lo, double hi, int iters = 200) {
  if (pred(lo)) return lo;
  if (!pred(hi)) throw std::invalid_argument("bisect_threshold: pred(hi) must hold");
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid)) hi = mid;
    else lo = mid;
  }
  return hi;
}

}  // namespace qpost

#endif  // QPOST_MATH_HPP
