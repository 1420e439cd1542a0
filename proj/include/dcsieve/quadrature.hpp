#pragma once

#include <string>
#include <vector>

namespace dcsieve {

enum class QuadScheme { Simpson, GaussLegendre };

/// Composite rule over [0, tau]. Panels are laid out so that every spline
/// knot is a panel edge; `panels` is the minimum total count.
struct QuadratureRule {
  QuadScheme scheme = QuadScheme::GaussLegendre;
  int panels = 64;
  /// Gauss-Legendre points per panel (ignored for Simpson).
  int points = 3;

  /// Number of integrand evaluations over [0, tau]; must be >= 16.
  int node_count() const;
  void validate() const;
};

/// Nodes and weights of a single-panel rule mapped to [0,1]; weights sum to 1.
struct PanelRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

PanelRule simpson_panel();
PanelRule gauss_legendre_panel(int points);
PanelRule panel_rule(const QuadratureRule& rule);

/// Panel edges on [0, tau] aligned with `knot_intervals` equal pieces.
std::vector<double> aligned_panel_edges(double tau, int knot_intervals, int min_panels);

std::string to_string(QuadScheme scheme);
QuadScheme quad_scheme_from_string(const std::string& name);

}  // namespace dcsieve
