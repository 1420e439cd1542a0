#include "dcsieve/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dcsieve {

namespace {

struct CoxEval {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
};

Eigen::MatrixXd design(const Dataset& data, const CovariateSet& covariates) {
  Eigen::MatrixXd z(data.size(), covariates.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t k = 0; k < covariates.size(); ++k)
      z(i, k) = CovariateSet::value(data.observations[i], covariates.columns[k], data.d);
  return z;
}

std::vector<std::size_t> order_by_time_desc(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return data.observations[a].y > data.observations[b].y;
  });
  return idx;
}

// Loglik, score and information over the columns flagged in `active`.
CoxEval evaluate(const Dataset& data, const std::vector<char>& events, const Eigen::MatrixXd& z,
                 const std::vector<std::size_t>& order, const Eigen::VectorXd& coef) {
  const Eigen::Index p = z.cols();
  CoxEval out;
  out.score = Eigen::VectorXd::Zero(p);
  out.info = Eigen::MatrixXd::Zero(p, p);
  const Eigen::VectorXd eta = z * coef;
  const double shift = eta.size() > 0 ? eta.maxCoeff() : 0.0;
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  std::size_t k = 0;
  while (k < order.size()) {
    // Breslow: everyone tied at this time joins the risk set before any event is scored.
    const double t = data.observations[order[k]].y;
    std::size_t end = k;
    while (end < order.size() && data.observations[order[end]].y == t) {
      const std::size_t i = order[end];
      const double w = std::exp(eta[i] - shift);
      s0 += w;
      s1.noalias() += w * z.row(i).transpose();
      s2.noalias() += w * z.row(i).transpose() * z.row(i);
      ++end;
    }
    const Eigen::VectorXd mean = s1 / s0;
    for (std::size_t q = k; q < end; ++q) {
      const std::size_t i = order[q];
      if (!events[i]) continue;
      out.loglik += eta[i] - shift - std::log(s0);
      out.score.noalias() += z.row(i).transpose() - mean;
      out.info.noalias() += s2 / s0 - mean * mean.transpose();
    }
    k = end;
  }
  return out;
}

std::vector<char> event_flags(const Dataset& data, EventRole role) {
  std::vector<char> e(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) e[i] = is_event(data, i, role) ? 1 : 0;
  return e;
}

}  // namespace

bool is_event(const Dataset& data, std::size_t i, EventRole role) {
  const auto& o = data.observations[i];
  if (role == EventRole::Failure) return o.r;
  return !o.r && o.y < data.tau;
}

double cox_loglik(const Dataset& data, EventRole role, const CovariateSet& covariates, const Eigen::VectorXd& coef) {
  const Eigen::MatrixXd z = design(data, covariates);
  return evaluate(data, event_flags(data, role), z, order_by_time_desc(data), coef).loglik;
}

CoxFit fit_cox(const Dataset& data, EventRole role, const CovariateSet& covariates, const CoxOptions& options) {
  data.validate();
  const auto events = event_flags(data, role);
  if (std::none_of(events.begin(), events.end(), [](char e) { return e != 0; }))
    throw std::runtime_error("cox fit: zero events");

  const Eigen::MatrixXd full = design(data, covariates);
  const Eigen::Index p = full.cols();
  CoxFit fit;
  fit.covariates = covariates;
  fit.role = role;
  fit.coef = Eigen::VectorXd::Zero(p);
  fit.info = Eigen::MatrixXd::Zero(p, p);
  fit.constant.assign(static_cast<std::size_t>(p), false);

  std::vector<Eigen::Index> active;
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto col = full.col(k);
    if ((col.array() == col[0]).all())
      fit.constant[k] = true;
    else
      active.push_back(k);
  }
  const auto order = order_by_time_desc(data);
  if (active.empty()) {
    fit.loglik = evaluate(data, events, full, order, fit.coef).loglik;
    fit.converged = true;
    return fit;
  }

  Eigen::MatrixXd z(full.rows(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) z.col(k) = full.col(active[k]);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(z.cols());
  CoxEval cur = evaluate(data, events, z, order, beta);
  int iter = 0;
  bool converged = cur.score.lpNorm<Eigen::Infinity>() < options.score_tolerance;
  while (!converged && iter < options.max_iterations) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff()))
      throw std::runtime_error("cox fit: singular information");
    Eigen::VectorXd step = ldlt.solve(cur.score);
    CoxEval next = evaluate(data, events, z, order, beta + step);
    int halvings = 0;
    while (!(next.loglik >= cur.loglik - 1e-12 * std::abs(cur.loglik)) && halvings < 30) {
      step *= 0.5;
      next = evaluate(data, events, z, order, beta + step);
      ++halvings;
    }
    beta += step;
    cur = std::move(next);
    ++iter;
    converged = cur.score.lpNorm<Eigen::Infinity>() < options.score_tolerance;
  }
  if (!converged) throw std::runtime_error("cox fit: no convergence after " + std::to_string(iter) + " iterations");
  // One more full Newton step puts the coefficients at machine precision.
  if (iter > 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.info);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      CoxEval polished = evaluate(data, events, z, order, beta + ldlt.solve(cur.score));
      if (polished.loglik >= cur.loglik - 1e-12 * std::abs(cur.loglik) &&
          polished.score.lpNorm<Eigen::Infinity>() <= cur.score.lpNorm<Eigen::Infinity>()) {
        beta += ldlt.solve(cur.score);
        cur = std::move(polished);
      }
    }
  }

  for (std::size_t k = 0; k < active.size(); ++k) fit.coef[active[k]] = beta[k];
  for (std::size_t a = 0; a < active.size(); ++a)
    for (std::size_t b = 0; b < active.size(); ++b) fit.info(active[a], active[b]) = cur.info(a, b);
  fit.loglik = cur.loglik;
  fit.iterations = iter;
  fit.converged = true;
  return fit;
}

Eigen::MatrixXd cox_influence(const CoxFit& fit, const Dataset& data) {
  if (!fit.converged) throw std::runtime_error("cox influence: fit did not converge");
  const std::size_t n = data.size();
  const Eigen::Index p = fit.coef.size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), p);

  std::vector<Eigen::Index> active;
  for (Eigen::Index k = 0; k < p; ++k)
    if (!fit.constant[k]) active.push_back(k);
  if (active.empty()) return out;

  const Eigen::MatrixXd full = design(data, fit.covariates);
  Eigen::MatrixXd z(full.rows(), static_cast<Eigen::Index>(active.size()));
  Eigen::VectorXd beta(static_cast<Eigen::Index>(active.size()));
  Eigen::MatrixXd info(beta.size(), beta.size());
  for (std::size_t a = 0; a < active.size(); ++a) {
    z.col(a) = full.col(active[a]);
    beta[a] = fit.coef[active[a]];
    for (std::size_t b = 0; b < active.size(); ++b) info(a, b) = fit.info(active[a], active[b]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw std::runtime_error("cox influence: singular information");

  const auto events = event_flags(data, fit.role);
  const Eigen::VectorXd eta = z * beta;
  const double shift = eta.maxCoeff();
  const Eigen::VectorXd w = (eta.array() - shift).exp();

  // Risk-set sums at each distinct time, descending.
  const auto order = order_by_time_desc(data);
  const Eigen::Index q = z.cols();
  std::vector<double> s0_at(n);
  std::vector<Eigen::VectorXd> mean_at(n);
  {
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(q);
    std::size_t k = 0;
    while (k < n) {
      const double t = data.observations[order[k]].y;
      std::size_t end = k;
      while (end < n && data.observations[order[end]].y == t) {
        s0 += w[order[end]];
        s1 += w[order[end]] * z.row(order[end]).transpose();
        ++end;
      }
      for (std::size_t j = k; j < end; ++j) {
        s0_at[order[j]] = s0;
        mean_at[order[j]] = s1 / s0;
      }
      k = end;
    }
  }

  // Ascending sweep: cumulative sums of dLambda_0 and mean * dLambda_0 over event times <= t.
  std::vector<std::size_t> asc(order.rbegin(), order.rend());
  double cum_a = 0.0;
  Eigen::VectorXd cum_b = Eigen::VectorXd::Zero(q);
  std::size_t k = 0;
  while (k < n) {
    const double t = data.observations[asc[k]].y;
    std::size_t end = k;
    while (end < n && data.observations[asc[end]].y == t) ++end;
    for (std::size_t j = k; j < end; ++j) {
      const std::size_t i = asc[j];
      if (!events[i]) continue;
      cum_a += 1.0 / s0_at[i];
      cum_b += mean_at[i] / s0_at[i];
    }
    for (std::size_t j = k; j < end; ++j) {
      const std::size_t i = asc[j];
      Eigen::VectorXd u = -w[i] * (z.row(i).transpose() * cum_a - cum_b);
      if (events[i]) u += z.row(i).transpose() - mean_at[i];
      const Eigen::VectorXd s = static_cast<double>(n) * ldlt.solve(u);
      for (std::size_t a = 0; a < active.size(); ++a) out(static_cast<Eigen::Index>(i), active[a]) = s[a];
    }
    k = end;
  }
  return out;
}

double naive_alpha(const Dataset& data) {
  return fit_cox(data, EventRole::Failure, CovariateSet::only_v(data.d)).coef[0];
}

}  // namespace dcsieve
