#pragma once

#include <span>
#include <vector>

namespace ilr {

/// Natural cubic spline weights over a fixed knot vector.
///
/// A natural spline is linear in its knot values, so evaluating at x reduces
/// to a weighted sum of the values. weights(x) computes that row once; it is
/// then reused for every pixel sharing the same knots.
class NaturalSplineBasis {
 public:
  explicit NaturalSplineBasis(std::vector<double> knots);

  const std::vector<double>& knots() const { return knots_; }

  /// Weights w with s(x) = sum_i w[i] * y[i]. x must lie inside the knot range.
  std::vector<double> weights(double x) const;

  /// Direct evaluation for one set of values.
  double evaluate(std::span<const double> values, double x) const;

 private:
  // Second-derivative operator: M = second_[i] rows give M_j as a linear
  // combination of the knot values (natural end conditions, M_0 = M_n = 0).
  std::vector<std::vector<double>> second_;
  std::vector<double> knots_;
};

}  // namespace ilr
