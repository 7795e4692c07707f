#include "ilr/spline.hpp"

#include <algorithm>

#include "ilr/common.hpp"

namespace ilr {

NaturalSplineBasis::NaturalSplineBasis(std::vector<double> knots) : knots_(std::move(knots)) {
  const std::size_t n = knots_.size();
  if (n < 2) throw invalid_argument("spline needs at least two knots");
  for (std::size_t i = 1; i < n; ++i)
    if (!(knots_[i] > knots_[i - 1])) throw invalid_argument("spline knots must be strictly ascending");

  second_.assign(n, std::vector<double>(n, 0.0));
  if (n == 2) return;

  // Tridiagonal system for interior second derivatives, solved once per
  // unit right-hand side (Thomas algorithm).
  const std::size_t m = n - 2;
  std::vector<double> sub(m), diag(m), sup(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double h0 = knots_[k + 1] - knots_[k];
    const double h1 = knots_[k + 2] - knots_[k + 1];
    sub[k] = h0 / 6.0;
    diag[k] = (h0 + h1) / 3.0;
    sup[k] = h1 / 6.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    // rhs_k = (y_{k+2} - y_{k+1}) / h1 - (y_{k+1} - y_k) / h0 for y = e_j.
    std::vector<double> rhs(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const double h0 = knots_[k + 1] - knots_[k];
      const double h1 = knots_[k + 2] - knots_[k + 1];
      double r = 0.0;
      if (j == k + 2) r += 1.0 / h1;
      if (j == k + 1) r -= 1.0 / h1 + 1.0 / h0;
      if (j == k) r += 1.0 / h0;
      rhs[k] = r;
    }
    std::vector<double> c(m), d(m);
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for (std::size_t k = 1; k < m; ++k) {
      const double den = diag[k] - sub[k] * c[k - 1];
      c[k] = sup[k] / den;
      d[k] = (rhs[k] - sub[k] * d[k - 1]) / den;
    }
    std::vector<double> x(m);
    x[m - 1] = d[m - 1];
    for (std::size_t k = m - 1; k-- > 0;) x[k] = d[k] - c[k] * x[k + 1];
    for (std::size_t k = 0; k < m; ++k) second_[k + 1][j] = x[k];
  }
}

std::vector<double> NaturalSplineBasis::weights(double x) const {
  const std::size_t n = knots_.size();
  if (!(x >= knots_.front() && x <= knots_.back())) throw invalid_argument("spline evaluation outside knot range");
  std::size_t seg = std::size_t(std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin());
  seg = std::clamp<std::size_t>(seg, 1, n - 1) - 1;
  const double h = knots_[seg + 1] - knots_[seg];
  const double b = (x - knots_[seg]) / h;
  const double a = 1.0 - b;
  const double ca = (a * a * a - a) * h * h / 6.0;
  const double cb = (b * b * b - b) * h * h / 6.0;
  std::vector<double> w(n, 0.0);
  w[seg] += a;
  w[seg + 1] += b;
  if (ca != 0.0 || cb != 0.0)
    for (std::size_t j = 0; j < n; ++j) w[j] += ca * second_[seg][j] + cb * second_[seg + 1][j];
  return w;
}

double NaturalSplineBasis::evaluate(std::span<const double> values, double x) const {
  if (values.size() != knots_.size()) throw invalid_argument("spline value count does not match knots");
  const auto w = weights(x);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * values[i];
  return s;
}

}  // namespace ilr
