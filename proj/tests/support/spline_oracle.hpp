#pragma once

#include <vector>

#include <Eigen/Dense>

namespace ilr::test {

// Natural cubic spline by brute force: one cubic per segment, all 4(n-1)
// coefficients solved together from interpolation, C1, C2 and natural ends.
class DenseSpline {
 public:
  DenseSpline(std::vector<double> x, const std::vector<double>& y) : x_(std::move(x)) {
    const int n = int(x_.size()), s = n - 1, N = 4 * s;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(N);
    int row = 0;
    // Segment i: a + b t + c t^2 + d t^3 with t = x - x_i.
    for (int i = 0; i < s; ++i) {
      const double h = x_[i + 1] - x_[i];
      A(row, 4 * i) = 1;
      b(row++) = y[i];
      A(row, 4 * i) = 1;
      A(row, 4 * i + 1) = h;
      A(row, 4 * i + 2) = h * h;
      A(row, 4 * i + 3) = h * h * h;
      b(row++) = y[i + 1];
    }
    for (int i = 0; i + 1 < s; ++i) {
      const double h = x_[i + 1] - x_[i];
      A(row, 4 * i + 1) = 1;
      A(row, 4 * i + 2) = 2 * h;
      A(row, 4 * i + 3) = 3 * h * h;
      A(row++, 4 * (i + 1) + 1) = -1;
      A(row, 4 * i + 2) = 2;
      A(row, 4 * i + 3) = 6 * h;
      A(row++, 4 * (i + 1) + 2) = -2;
    }
    A(row++, 2) = 2;
    const double hl = x_[n - 1] - x_[n - 2];
    A(row, 4 * (s - 1) + 2) = 2;
    A(row++, 4 * (s - 1) + 3) = 6 * hl;
    coef_ = A.fullPivLu().solve(b);
  }

  double operator()(double x) const {
    int i = 0;
    while (i + 2 < int(x_.size()) && x > x_[i + 1]) ++i;
    const double t = x - x_[i];
    return coef_(4 * i) + t * (coef_(4 * i + 1) + t * (coef_(4 * i + 2) + t * coef_(4 * i + 3)));
  }

 private:
  std::vector<double> x_;
  Eigen::VectorXd coef_;
};

}  // namespace ilr::test
