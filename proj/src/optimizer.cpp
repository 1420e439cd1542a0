#include "dcsieve/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dcsieve {

namespace {

// Everything below minimizes phi(t) = -f(x + t d).
struct Trial {
  double t = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd g;
};

class LineSearch {
 public:
  LineSearch(const ValueAndGradient& f, const Eigen::VectorXd& x, const Eigen::VectorXd& d, const Eigen::VectorXd& lower,
             const Eigen::VectorXd& upper, const OptimizerOptions& opt, int& evaluations)
      : f_(f), x_(x), d_(d), lower_(lower), upper_(upper), opt_(opt), evaluations_(evaluations) {}

  Trial at(double t) {
    Trial tr;
    tr.t = t;
    tr.x = (x_ + t * d_).cwiseMax(lower_).cwiseMin(upper_);
    tr.g.resize(x_.size());
    tr.f = f_(tr.x, &tr.g);
    ++evaluations_;
    tr.phi = -tr.f;
    tr.dphi = -tr.g.dot(d_);
    if (!std::isfinite(tr.phi)) {
      tr.phi = std::numeric_limits<double>::infinity();
      tr.dphi = std::numeric_limits<double>::infinity();
    }
    return tr;
  }

  // Returns false when no acceptable step was found.
  bool search(const Trial& start, double t_init, double t_max, Trial& out) {
    const double phi0 = start.phi;
    const double dphi0 = start.dphi;
    Trial prev = start;
    double t = std::min(t_init, t_max);
    for (int i = 0; i < opt_.max_line_search; ++i) {
      Trial cur = at(t);
      if (cur.phi > phi0 + opt_.armijo * t * dphi0 || (i > 0 && cur.phi >= prev.phi))
        return zoom(start, prev, cur, out);
      if (std::abs(cur.dphi) <= -opt_.curvature * dphi0) {
        out = cur;
        return true;
      }
      if (cur.dphi >= 0.0) return zoom(start, cur, prev, out);
      if (t >= t_max) {
        out = cur;
        return true;
      }
      prev = cur;
      t = std::min(2.0 * t, t_max);
    }
    if (prev.t > 0.0) {
      out = prev;
      return true;
    }
    return false;
  }

 private:
  bool zoom(const Trial& start, Trial lo, Trial hi, Trial& out) {
    const double phi0 = start.phi;
    const double dphi0 = start.dphi;
    for (int i = 0; i < opt_.max_line_search; ++i) {
      const double a = std::min(lo.t, hi.t);
      const double b = std::max(lo.t, hi.t);
      double t = cubic_min(lo, hi);
      const double guard = 0.1 * (b - a);
      if (!std::isfinite(t) || t < a + guard || t > b - guard) t = 0.5 * (a + b);
      if (b - a < 1e-16 * std::max(1.0, b)) break;
      Trial cur = at(t);
      if (cur.phi > phi0 + opt_.armijo * t * dphi0 || cur.phi >= lo.phi) {
        hi = cur;
      } else {
        if (std::abs(cur.dphi) <= -opt_.curvature * dphi0) {
          out = cur;
          return true;
        }
        if (cur.dphi * (hi.t - lo.t) >= 0.0) hi = lo;
        lo = cur;
      }
    }
    if (lo.t > 0.0 && lo.phi < phi0) {
      out = lo;
      return true;
    }
    return false;
  }

  static double cubic_min(const Trial& p, const Trial& q) {
    if (!std::isfinite(p.phi) || !std::isfinite(q.phi) || !std::isfinite(p.dphi) || !std::isfinite(q.dphi))
      return std::numeric_limits<double>::quiet_NaN();
    const double d1 = p.dphi + q.dphi - 3.0 * (p.phi - q.phi) / (p.t - q.t);
    const double disc = d1 * d1 - p.dphi * q.dphi;
    if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double d2 = std::copysign(std::sqrt(disc), q.t - p.t);
    return q.t - (q.t - p.t) * (q.dphi + d2 - d1) / (q.dphi - p.dphi + 2.0 * d2);
  }

  const ValueAndGradient& f_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& d_;
  const Eigen::VectorXd& lower_;
  const Eigen::VectorXd& upper_;
  const OptimizerOptions& opt_;
  int& evaluations_;
};

double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& d, const Eigen::VectorXd& lower,
                const Eigen::VectorXd& upper) {
  double t = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (d[k] > 0.0 && std::isfinite(upper[k])) t = std::min(t, (upper[k] - x[k]) / d[k]);
    if (d[k] < 0.0 && std::isfinite(lower[k])) t = std::min(t, (lower[k] - x[k]) / d[k]);
  }
  return t;
}

void freeze_active(const Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                   Eigen::VectorXd& d) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if ((x[k] >= upper[k] && d[k] > 0.0) || (x[k] <= lower[k] && d[k] < 0.0)) d[k] = 0.0;
  }
}

}  // namespace

OptimizerResult bfgs_maximize(const ValueAndGradient& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper, const OptimizerOptions& options) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("bfgs: bound dimension mismatch");
  if ((lower.array() > upper.array()).any()) throw std::invalid_argument("bfgs: lower bound above upper bound");

  OptimizerResult res;
  res.x = x0.cwiseMax(lower).cwiseMin(upper);
  res.gradient.resize(n);
  res.value = f(res.x, &res.gradient);
  res.evaluations = 1;
  if (!std::isfinite(res.value)) throw std::runtime_error("bfgs: objective is not finite at the initial point");
  res.trace.push_back(res.value);

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;
  bool scaled = false;
  for (res.iterations = 0; res.iterations < options.max_iterations;) {
    Eigen::VectorXd d = h * res.gradient;
    freeze_active(res.x, lower, upper, d);
    if (!(d.dot(res.gradient) > 0.0)) {
      h.setIdentity();
      fresh = true;
      d = res.gradient;
      freeze_active(res.x, lower, upper, d);
    }
    if (d.norm() < options.direction_tolerance) {
      res.converged = true;
      res.reason = "direction";
      break;
    }
    const double t_max = max_step(res.x, d, lower, upper);
    const double t_init = fresh ? std::min(1.0, 1.0 / d.lpNorm<Eigen::Infinity>()) : 1.0;

    Trial start;
    start.t = 0.0;
    start.phi = -res.value;
    start.dphi = -res.gradient.dot(d);
    LineSearch ls(f, res.x, d, lower, upper, options, res.evaluations);
    Trial next;
    if (!ls.search(start, t_init, t_max, next)) {
      if (!fresh) {
        h.setIdentity();
        fresh = true;
        continue;
      }
      res.reason = "line search failed";
      break;
    }
    ++res.iterations;
    const Eigen::VectorXd s = next.x - res.x;
    const Eigen::VectorXd y = res.gradient - next.g;  // gradient change of -f
    res.x = next.x;
    res.value = next.f;
    res.gradient = next.g;
    res.trace.push_back(res.value);
    fresh = false;

    if (s.norm() < options.step_tolerance) {
      res.converged = true;
      res.reason = "step";
      break;
    }
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h * y;
      // H <- (I - rho s y') H (I - rho y s') + rho s s'
      h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  if (!res.converged && res.reason.empty()) res.reason = "iteration limit";
  return res;
}

}  // namespace dcsieve
