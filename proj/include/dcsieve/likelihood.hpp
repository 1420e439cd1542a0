#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dcsieve/quadrature.hpp"
#include "dcsieve/sieve.hpp"

namespace dcsieve {

/// Records after dimension reduction: (Y, R, U, V).
struct ReducedSample {
  std::vector<double> y;
  std::vector<char> r;
  std::vector<double> u;
  std::vector<double> v;
  double tau = 1.0;

  std::size_t size() const { return y.size(); }
};

/// Map a dataset through U(gamma) using the given support bounds.
ReducedSample reduce(const Dataset& data, const CovariateSet& covariates, const Eigen::VectorXd& gamma,
                     const SupportBounds& bounds);

struct ObjectiveOptions {
  double penalty_weight = 1e-3;
  QuadratureRule rule;
  /// Gauss-Legendre points per knot interval for the u-normalizers.
  int u_points = kDefaultUPoints;
};

/// Penalized sieve pseudo-likelihood
///   mean_i l_i(alpha, xi, eta1, eta2) - penalty_weight * (sum of squared spline coefficients).
/// The same fixed node set serves the cumulative hazard, the censored integral
/// and their derivatives, so `gradient` is the exact derivative of `value`.
class Objective {
 public:
  Objective(ReducedSample sample, SieveLayout layout, ObjectiveOptions options = {});

  const SieveLayout& layout() const { return layout_; }
  const ReducedSample& sample() const { return sample_; }
  const ObjectiveOptions& options() const { return options_; }

  double value(const SieveParams& params) const;
  /// Gradient with respect to every coefficient (pinned ones are 0), in SieveParams shape.
  SieveParams gradient(const SieveParams& params) const;
  /// Value and gradient over the packed free vector.
  double value_and_gradient(const SieveParams& params, Eigen::VectorXd* grad_free) const;

  /// Unpenalized per-record log-likelihood terms l_i.
  Eigen::VectorXd per_observation(const SieveParams& params) const;
  double penalty(const SieveParams& params) const;

 private:
  struct Node {
    double s;
    int panel;
    double offset;  // s - panel start
  };
  struct Term {
    int node;
    double weight;
    bool shared;
  };

  int add_node(double s, int panel);
  int panel_of(double y) const;
  double evaluate(const SieveParams& params, SieveParams* grad, Eigen::VectorXd* per_obs) const;

  ReducedSample sample_;
  SieveLayout layout_;
  ObjectiveOptions options_;
  PanelRule rule_;

  std::vector<double> edges_;
  std::vector<Node> nodes_;
  Eigen::MatrixXd node_basis_;     // nodes x p, N(s/tau)
  Eigen::MatrixXd sub_basis_;      // (nodes * R) x p, points for Lambda(s) - Lambda(panel start)
  std::vector<int> shared_nodes_;  // per panel, R consecutive entries

  Eigen::MatrixXd u_grid_basis_;   // G x p
  Eigen::VectorXd u_grid_weight_;  // G

  // Treatment groups: records sharing the same v.
  std::vector<Eigen::VectorXd> group_phi_;
  std::vector<int> obs_group_;
  Eigen::MatrixXd obs_u_basis_;    // n x p

  // Record i: event node, or partial-panel nodes plus the first full panel.
  std::vector<int> event_node_;
  std::vector<std::vector<Term>> partial_terms_;
  std::vector<int> first_full_panel_;
};

/// Single-record log-likelihood at a given u.
double loglik_obs(const SieveParams& params, const Observation& obs, double u, const ObjectiveOptions& options = {});

}  // namespace dcsieve
