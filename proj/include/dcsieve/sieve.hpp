#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dcsieve/bspline.hpp"
#include "dcsieve/cox.hpp"
#include "dcsieve/data.hpp"
#include "dcsieve/quadrature.hpp"

namespace dcsieve {

/// How the treatment direction of the sieve is represented.
///   Discrete:   one coefficient block per observed treatment value.
///   Continuous: tensor product with the B-spline basis in v.
///   Auto:       Discrete when V takes at most kMaxCategories distinct values.
enum class VMode { Auto, Discrete, Continuous };

inline constexpr int kMaxCategories = 5;

VMode resolve_v_mode(VMode mode, const Dataset& data);
std::vector<double> treatment_categories(const Dataset& data);
std::string to_string(VMode mode);
VMode v_mode_from_string(const std::string& name);

/// Linear index gamma' w over the selected columns of W = (X, V).
double linear_index(const Observation& obs, const CovariateSet& covariates, const Eigen::VectorXd& gamma, int d);

/// Support [a(v), b(v)] of the linear index given V = v, with a relative margin.
struct SupportBounds {
  bool discrete = true;
  double relative_margin = 1e-6;

  // Discrete: per category.
  std::vector<double> categories;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> margin;

  // Continuous: pooled min/max over |v_j - v| <= window.
  double window = 0.1;
  std::vector<double> sample_v;      // sorted
  std::vector<double> sample_index;  // index values in the same order
  double global_margin = 0.0;

  /// (a(v), b(v), delta(v)).
  struct Interval {
    double a;
    double b;
    double delta;
  };
  Interval at(double v) const;
  int category_of(double v) const;
};

/// Throws std::invalid_argument for a category with fewer than two records or a
/// degenerate (constant) index.
SupportBounds estimate_support(const Dataset& data, const CovariateSet& covariates, const Eigen::VectorXd& gamma,
                               VMode mode = VMode::Auto, double window = 0.1);

/// Affine rescale of `index` to [0,1] given V = v. Values within the margin
/// outside [a, b] are clipped; anything further out throws std::domain_error.
double u_transform(double index, double v, const SupportBounds& bounds);
double u_transform(const Observation& obs, const CovariateSet& covariates, const Eigen::VectorXd& gamma, int d,
                   const SupportBounds& bounds);

/// Shape of the sieve: one spline basis shared by the u, y/tau and v directions.
struct SieveLayout {
  SplineBasis basis{3, 5};
  bool discrete_v = true;
  std::vector<double> categories;
  double tau = 1.0;

  int p() const { return basis.dimension(); }
  /// Number of treatment factors: categories for discrete V, p() for continuous V.
  int q() const { return discrete_v ? static_cast<int>(categories.size()) : p(); }
  /// Treatment factor weights phi_c(v): one-hot (discrete) or B-spline values.
  Eigen::VectorXd v_factor(double v) const;
  int category_of(double v) const;
  /// Free coefficients: alpha, xi, eta1 (u-row 0 pinned), eta2 (u-row 0 pinned).
  int free_count() const { return 1 + p() + q() * (p() - 1) * p() + q() * (p() - 1); }

  bool operator==(const SieveLayout& o) const {
    return basis == o.basis && discrete_v == o.discrete_v && categories == o.categories && tau == o.tau;
  }
};

SieveLayout make_layout(const Dataset& data, int m, int kn, VMode mode = VMode::Auto);

/// Coefficients of (alpha, xi, eta1, eta2). eta1(u,y,v) = sum N_a(u) N_b(y/tau) phi_c(v) eta1[c](a,b),
/// eta2(u,v) = sum N_a(u) phi_c(v) eta2(a,c). Row a = 0 of every block is pinned to zero,
/// which makes eta1(0,y,v) = eta2(0,v) = 0 because only N_0 is nonzero at u = 0.
struct SieveParams {
  SieveLayout layout;
  double alpha = 1.0;
  double bigM = 10.0;
  Eigen::VectorXd xi;
  std::vector<Eigen::MatrixXd> eta1;
  Eigen::MatrixXd eta2;

  static SieveParams zeros(const SieveLayout& layout, double alpha = 1.0, double bigM = 10.0);

  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& free);
  /// Re-zero pinned coefficients.
  void pin();
  double spline_sum_squares() const;
  /// L1 norms of (xi, eta1, eta2).
  std::array<double, 3> l1_norms() const;
};

/// Evaluate the sieve functions at a point.
double xi_at(const SieveParams& params, double y);
double eta1_at(const SieveParams& params, double u, double y, double v);
double eta2_at(const SieveParams& params, double u, double v);
double lambda_at(const SieveParams& params, double y);
/// Integral of lambda over [0, y] with the knot-aligned composite rule.
double cum_hazard(const SieveParams& params, double y, const QuadratureRule& rule = {});

/// Gauss-Legendre points per knot interval used for the u-normalizers.
inline constexpr int kDefaultUPoints = 16;
double eta1_normalizer(const SieveParams& params, double y, double v, int u_points = kDefaultUPoints);
double eta2_normalizer(const SieveParams& params, double v, int u_points = kDefaultUPoints);
double f_density(const SieveParams& params, double u, double y, double v, int u_points = kDefaultUPoints);
double g_density(const SieveParams& params, double u, double v, int u_points = kDefaultUPoints);

/// (m, K_n, M_n) = (k+2, ceil(Mtilde n^beta), Mtilde sqrt(log n)); requires k >= 11 and
/// 1/(2k) < beta < 3/(4k+9).
struct SieveSchedule {
  int m;
  int kn;
  double bound;
};
SieveSchedule asymptotic_schedule(int n, int k = 11, double m_tilde = 1.0, double beta = -1.0);

std::string params_to_json(const SieveParams& params);
SieveParams params_from_json(const std::string& text);

}  // namespace dcsieve
