#include "dcsieve/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dcsieve {

namespace {
constexpr double kDomainSlack = 1e-12;
}

SplineBasis::SplineBasis(int m, int kn) : m_(m), kn_(kn) {
  if (m < 2 || m > 20) throw std::invalid_argument("spline basis: m must be in [2, 20]");
  if (kn < 1) throw std::invalid_argument("spline basis: kn must be >= 1");
  knots_.resize(static_cast<std::size_t>(kn + 2 * m + 1));
  for (int i = 0; i < static_cast<int>(knots_.size()); ++i) {
    const int j = std::clamp(i - m, 0, kn);
    knots_[i] = (j == kn) ? 1.0 : static_cast<double>(j) / kn;
  }
}

SplineBasis make_basis(int m, int kn) { return SplineBasis(m, kn); }

void SplineBasis::check_domain(double s) const {
  if (!(s >= -kDomainSlack && s <= 1.0 + kDomainSlack)) {
    std::ostringstream msg;
    msg << "spline basis: argument " << s << " outside [0,1]";
    throw std::domain_error(msg.str());
  }
}

int SplineBasis::interval_of(double s) const {
  const int j = static_cast<int>(std::floor(s * kn_));
  return std::clamp(j, 0, kn_ - 1);
}

void SplineBasis::nonzero_values(int span, double s, int degree, double* out) const {
  // Stable triangular recursion; left/right hold distances to neighbouring knots.
  double left[32];
  double right[32];
  out[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = s - knots_[span + 1 - j];
    right[j] = knots_[span + j] - s;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

Eigen::VectorXd SplineBasis::eval(double s) const {
  check_domain(s);
  s = std::clamp(s, 0.0, 1.0);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dimension());
  const int span = m_ + interval_of(s);
  double vals[32];
  nonzero_values(span, s, m_, vals);
  for (int r = 0; r <= m_; ++r) out[span - m_ + r] = vals[r];
  return out;
}

Eigen::VectorXd SplineBasis::eval_deriv(double s) const {
  check_domain(s);
  s = std::clamp(s, 0.0, 1.0);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dimension());
  const int span = m_ + interval_of(s);
  double lower[32];
  nonzero_values(span, s, m_ - 1, lower);
  // lower[r] holds N_{span-m+1+r} of degree m-1.
  for (int j = span - m_; j <= span; ++j) {
    double d = 0.0;
    const int r = j - (span - m_ + 1);
    if (r >= 0) d += lower[r] / (knots_[j + m_] - knots_[j]);
    if (r + 1 <= m_ - 1) d -= lower[r + 1] / (knots_[j + m_ + 1] - knots_[j + 1]);
    out[j] = m_ * d;
  }
  return out;
}

Eigen::VectorXd SplineBasis::greville() const {
  Eigen::VectorXd g(dimension());
  for (int j = 0; j < dimension(); ++j) {
    double acc = 0.0;
    for (int k = 1; k <= m_; ++k) acc += knots_[j + k];
    g[j] = acc / m_;
  }
  return g;
}

}  // namespace dcsieve
