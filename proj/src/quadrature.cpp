#include "dcsieve/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dcsieve {

int QuadratureRule::node_count() const {
  return scheme == QuadScheme::Simpson ? 2 * panels + 1 : panels * points;
}

void QuadratureRule::validate() const {
  if (panels < 1) throw std::invalid_argument("quadrature: panels must be positive");
  if (scheme == QuadScheme::GaussLegendre && (points < 1 || points > 64))
    throw std::invalid_argument("quadrature: Gauss-Legendre points must be in [1, 64]");
  if (node_count() < 16) throw std::invalid_argument("quadrature: fewer than 16 nodes");
}

PanelRule simpson_panel() { return {{0.0, 0.5, 1.0}, {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0}}; }

PanelRule gauss_legendre_panel(int points) {
  if (points < 1) throw std::invalid_argument("gauss_legendre_panel: points must be positive");
  PanelRule rule;
  rule.nodes.resize(points);
  rule.weights.resize(points);
  const int half = (points + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int k = 1; k <= points; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
      }
      dp = points * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Map [-1,1] to [0,1].
    rule.nodes[i] = 0.5 * (1.0 - x);
    rule.nodes[points - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[points - 1 - i] = 0.5 * w;
  }
  return rule;
}

PanelRule panel_rule(const QuadratureRule& rule) {
  return rule.scheme == QuadScheme::Simpson ? simpson_panel() : gauss_legendre_panel(rule.points);
}

std::vector<double> aligned_panel_edges(double tau, int knot_intervals, int min_panels) {
  if (tau <= 0.0 || knot_intervals < 1 || min_panels < 1)
    throw std::invalid_argument("aligned_panel_edges: invalid arguments");
  const int per_interval = (min_panels + knot_intervals - 1) / knot_intervals;
  const int total = per_interval * knot_intervals;
  std::vector<double> edges(total + 1);
  for (int k = 0; k <= total; ++k) {
    // Knot positions land exactly on k*tau/total for multiples of per_interval.
    edges[k] = tau * static_cast<double>(k) / total;
  }
  edges.back() = tau;
  return edges;
}

std::string to_string(QuadScheme scheme) {
  return scheme == QuadScheme::Simpson ? "simpson" : "gauss-legendre";
}

QuadScheme quad_scheme_from_string(const std::string& name) {
  if (name == "simpson" || name == "composite-simpson") return QuadScheme::Simpson;
  if (name == "gauss-legendre" || name == "gauss_legendre") return QuadScheme::GaussLegendre;
  throw std::invalid_argument("unknown quadrature scheme: " + name);
}

}  // namespace dcsieve
