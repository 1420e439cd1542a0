#pragma once

#include <vector>

#include <Eigen/Dense>

namespace dcsieve {

/// Normalized B-spline basis on [0,1] with equally spaced interior knots.
///
/// The extended partition repeats each end knot m+1 times,
///   s_{-m} = ... = s_0 = 0 < s_1 < ... < s_K = 1 = ... = s_{K+m},
/// so the pieces are polynomials of degree m and the basis has m+K
/// functions. At s = 0 only the first function is nonzero.
class SplineBasis {
 public:
  SplineBasis(int m, int kn);

  int m() const { return m_; }
  int intervals() const { return kn_; }
  int dimension() const { return m_ + kn_; }
  const std::vector<double>& knots() const { return knots_; }

  /// Index of the interval [s_j, s_{j+1}) containing s; s = 1 maps to the last one.
  int interval_of(double s) const;

  Eigen::VectorXd eval(double s) const;
  Eigen::VectorXd eval_deriv(double s) const;

  /// Greville abscissae; used as coefficients they reproduce s -> s.
  Eigen::VectorXd greville() const;

  bool operator==(const SplineBasis& other) const { return m_ == other.m_ && kn_ == other.kn_; }

 private:
  // Nonzero values N_{j-m..j} of degree `degree` at s within knot span j.
  void nonzero_values(int span, double s, int degree, double* out) const;
  void check_domain(double s) const;

  int m_;
  int kn_;
  std::vector<double> knots_;
};

SplineBasis make_basis(int m, int kn);

}  // namespace dcsieve
