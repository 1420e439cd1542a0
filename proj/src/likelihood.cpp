#include "dcsieve/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dcsieve {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix stack_rows(const std::vector<Eigen::VectorXd>& rows, int p) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return out;
}

// log of the u-normalizer and the mean of N(U) under exp(N(u).coef).
struct Normalizer {
  double log_z = 0.0;
  Eigen::VectorXd mean;
};

}  // namespace

ReducedSample reduce(const Dataset& data, const CovariateSet& covariates, const Eigen::VectorXd& gamma,
                     const SupportBounds& bounds) {
  ReducedSample out;
  out.tau = data.tau;
  out.y.reserve(data.size());
  for (const auto& o : data.observations) {
    out.y.push_back(o.y);
    out.r.push_back(o.r ? 1 : 0);
    out.u.push_back(u_transform(o, covariates, gamma, data.d, bounds));
    out.v.push_back(o.v);
  }
  return out;
}

Objective::Objective(ReducedSample sample, SieveLayout layout, ObjectiveOptions options)
    : sample_(std::move(sample)), layout_(std::move(layout)), options_(options) {
  options_.rule.validate();
  if (!(options_.penalty_weight >= 0.0)) throw std::invalid_argument("objective: penalty weight must be >= 0");
  if (options_.u_points < 2) throw std::invalid_argument("objective: u_points must be >= 2");
  const std::size_t n = sample_.size();
  if (n == 0) throw std::invalid_argument("no observations");
  if (sample_.r.size() != n || sample_.u.size() != n || sample_.v.size() != n)
    throw std::invalid_argument("objective: sample columns differ in length");
  if (std::abs(sample_.tau - layout_.tau) > 1e-12 * layout_.tau)
    throw std::invalid_argument("objective: sample and layout disagree on tau");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(sample_.u[i] >= 0.0 && sample_.u[i] <= 1.0)) throw std::invalid_argument("objective: u outside [0,1]");
    if (!(sample_.y[i] >= 0.0 && sample_.y[i] <= sample_.tau)) throw std::invalid_argument("objective: y outside [0,tau]");
  }

  const int p = layout_.p();
  rule_ = panel_rule(options_.rule);
  edges_ = aligned_panel_edges(layout_.tau, layout_.basis.intervals(), options_.rule.panels);
  const int panels = static_cast<int>(edges_.size()) - 1;
  const int rn = static_cast<int>(rule_.nodes.size());

  std::vector<Eigen::VectorXd> node_rows;
  std::vector<Eigen::VectorXd> sub_rows;
  auto push_node = [&](double s, int panel) {
    Node node{s, panel, s - edges_[panel]};
    nodes_.push_back(node);
    node_rows.push_back(layout_.basis.eval(std::clamp(s / layout_.tau, 0.0, 1.0)));
    for (int q = 0; q < rn; ++q) {
      const double t = edges_[panel] + rule_.nodes[q] * node.offset;
      sub_rows.push_back(layout_.basis.eval(std::clamp(t / layout_.tau, 0.0, 1.0)));
    }
    return static_cast<int>(nodes_.size()) - 1;
  };

  for (int k = 0; k < panels; ++k) {
    const double width = edges_[k + 1] - edges_[k];
    for (int r = 0; r < rn; ++r) shared_nodes_.push_back(push_node(edges_[k] + rule_.nodes[r] * width, k));
  }

  // u quadrature: Gauss-Legendre on every knot interval.
  {
    const PanelRule gl = gauss_legendre_panel(options_.u_points);
    const int kn = layout_.basis.intervals();
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> weights;
    for (int k = 0; k < kn; ++k)
      for (std::size_t r = 0; r < gl.nodes.size(); ++r) {
        rows.push_back(layout_.basis.eval((k + gl.nodes[r]) / kn));
        weights.push_back(gl.weights[r] / kn);
      }
    u_grid_basis_ = stack_rows(rows, p);
    u_grid_weight_ = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  }

  // Treatment groups.
  std::map<double, int> group_of_v;
  obs_group_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = sample_.v[i];
    int g = -1;
    if (layout_.discrete_v) {
      g = layout_.category_of(v);
    } else {
      auto it = group_of_v.find(v);
      if (it == group_of_v.end()) it = group_of_v.emplace(v, static_cast<int>(group_of_v.size())).first;
      g = it->second;
    }
    obs_group_[i] = g;
  }
  if (layout_.discrete_v) {
    for (int c = 0; c < layout_.q(); ++c) group_phi_.push_back(layout_.v_factor(layout_.categories[c]));
  } else {
    group_phi_.resize(group_of_v.size());
    for (const auto& [v, g] : group_of_v) group_phi_[g] = layout_.v_factor(v);
  }

  std::vector<Eigen::VectorXd> u_rows;
  event_node_.assign(n, -1);
  partial_terms_.resize(n);
  first_full_panel_.assign(n, panels);
  for (std::size_t i = 0; i < n; ++i) {
    u_rows.push_back(layout_.basis.eval(sample_.u[i]));
    const int k = panel_of(sample_.y[i]);
    if (sample_.r[i]) {
      event_node_[i] = push_node(sample_.y[i], k);
      continue;
    }
    const double width = edges_[k + 1] - sample_.y[i];
    if (width > 0.0) {
      for (int r = 0; r < rn; ++r) {
        const int j = push_node(sample_.y[i] + rule_.nodes[r] * width, k);
        partial_terms_[i].push_back({j, rule_.weights[r] * width, false});
      }
    }
    first_full_panel_[i] = k + 1;
  }
  obs_u_basis_ = stack_rows(u_rows, p);
  node_basis_ = stack_rows(node_rows, p);
  sub_basis_ = stack_rows(sub_rows, p);
}

int Objective::panel_of(double y) const {
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), y);
  const int k = static_cast<int>(it - edges_.begin()) - 1;
  return std::clamp(k, 0, static_cast<int>(edges_.size()) - 2);
}

double Objective::penalty(const SieveParams& params) const {
  return options_.penalty_weight * params.spline_sum_squares();
}

double Objective::value(const SieveParams& params) const { return evaluate(params, nullptr, nullptr); }

SieveParams Objective::gradient(const SieveParams& params) const {
  SieveParams grad = SieveParams::zeros(layout_, 0.0, params.bigM);
  evaluate(params, &grad, nullptr);
  return grad;
}

double Objective::value_and_gradient(const SieveParams& params, Eigen::VectorXd* grad_free) const {
  if (grad_free == nullptr) return evaluate(params, nullptr, nullptr);
  SieveParams grad = SieveParams::zeros(layout_, 0.0, params.bigM);
  const double val = evaluate(params, &grad, nullptr);
  *grad_free = grad.pack();
  return val;
}

Eigen::VectorXd Objective::per_observation(const SieveParams& params) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(sample_.size()));
  evaluate(params, nullptr, &out);
  return out;
}

double Objective::evaluate(const SieveParams& params, SieveParams* grad, Eigen::VectorXd* per_obs) const {
  if (!(params.layout == layout_)) throw std::invalid_argument("objective: parameter layout mismatch");
  const int p = layout_.p();
  const int rn = static_cast<int>(rule_.nodes.size());
  const int panels = static_cast<int>(edges_.size()) - 1;
  const Eigen::Index nn = static_cast<Eigen::Index>(nodes_.size());
  const bool want_grad = grad != nullptr;
  const Eigen::VectorXd& xi = params.xi;
  const double alpha = params.alpha;

  // Hazard at nodes and at the sub-rule points.
  const Eigen::VectorXd log_lam = node_basis_ * xi;
  const Eigen::VectorXd lam = log_lam.array().exp();
  const Eigen::VectorXd lam_sub = (sub_basis_ * xi).array().exp();

  // Cumulative hazard at panel edges.
  std::vector<double> lam_edge(panels + 1, 0.0);
  RowMatrix dlam_edge;
  if (want_grad) dlam_edge = RowMatrix::Zero(panels + 1, p);
  for (int k = 0; k < panels; ++k) {
    const double width = edges_[k + 1] - edges_[k];
    double acc = 0.0;
    for (int r = 0; r < rn; ++r) {
      const int j = shared_nodes_[k * rn + r];
      const double w = rule_.weights[r] * width * lam[j];
      acc += w;
      if (want_grad) dlam_edge.row(k + 1) += w * node_basis_.row(j);
    }
    lam_edge[k + 1] = lam_edge[k] + acc;
    if (want_grad) dlam_edge.row(k + 1) += dlam_edge.row(k);
  }

  Eigen::VectorXd cum(nn);
  RowMatrix dcum;
  if (want_grad) dcum.resize(nn, p);
  for (Eigen::Index j = 0; j < nn; ++j) {
    const Node& node = nodes_[j];
    double acc = 0.0;
    if (want_grad) dcum.row(j) = dlam_edge.row(node.panel);
    for (int q = 0; q < rn; ++q) {
      const double w = rule_.weights[q] * node.offset * lam_sub[j * rn + q];
      acc += w;
      if (want_grad) dcum.row(j) += w * sub_basis_.row(j * rn + q);
    }
    cum[j] = lam_edge[node.panel] + acc;
  }
  const double cum_tau = lam_edge[panels];

  // Group coefficient blocks.
  const std::size_t ngroups = group_phi_.size();
  std::vector<Eigen::MatrixXd> hmat(ngroups, Eigen::MatrixXd::Zero(p, p));
  std::vector<Eigen::VectorXd> h2(ngroups);
  for (std::size_t g = 0; g < ngroups; ++g) {
    const Eigen::VectorXd& phi = group_phi_[g];
    for (int c = 0; c < layout_.q(); ++c)
      if (phi[c] != 0.0) hmat[g] += phi[c] * params.eta1[c];
    h2[g] = params.eta2 * phi;
  }

  auto normalize = [&](const Eigen::VectorXd& coef, bool with_mean) {
    Normalizer out;
    const Eigen::VectorXd expo = u_grid_basis_ * coef;
    const double top = expo.maxCoeff();
    const Eigen::VectorXd we = u_grid_weight_.array() * (expo.array() - top).exp();
    const double z = we.sum();
    out.log_z = top + std::log(z);
    if (with_mean) out.mean = (u_grid_basis_.transpose() * we) / z;
    return out;
  };

  // Normalizers at shared nodes for groups with censored records; at own nodes otherwise.
  const std::size_t ns = shared_nodes_.size();
  std::vector<char> group_needs_shared(ngroups, 0);
  for (std::size_t i = 0; i < sample_.size(); ++i)
    if (!sample_.r[i] && first_full_panel_[i] < panels) group_needs_shared[obs_group_[i]] = 1;
  std::vector<std::vector<Normalizer>> shared_norm(ngroups);
  for (std::size_t g = 0; g < ngroups; ++g) {
    if (!group_needs_shared[g]) continue;
    shared_norm[g].resize(ns);
    for (std::size_t s = 0; s < ns; ++s) {
      const int j = shared_nodes_[s];
      shared_norm[g][s] = normalize(hmat[g] * node_basis_.row(j).transpose(), want_grad);
    }
  }
  std::vector<Normalizer> norm2(ngroups);
  for (std::size_t g = 0; g < ngroups; ++g) norm2[g] = normalize(h2[g], want_grad);

  std::vector<Eigen::MatrixXd> dh(want_grad ? ngroups : 0, Eigen::MatrixXd::Zero(p, p));
  std::vector<Eigen::VectorXd> dh2(want_grad ? ngroups : 0, Eigen::VectorXd::Zero(p));
  double dalpha = 0.0;
  Eigen::VectorXd dxi = Eigen::VectorXd::Zero(p);

  std::vector<double> logs;
  std::vector<int> term_node;
  std::vector<const Normalizer*> term_norm;
  std::vector<Normalizer> own_norm;
  double total = 0.0;
  const std::size_t n = sample_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int g = obs_group_[i];
    const double v = sample_.v[i];
    const double ev = std::exp(alpha * v);
    const Eigen::VectorXd nu = obs_u_basis_.row(static_cast<Eigen::Index>(i)).transpose();
    const Eigen::VectorXd ci = hmat[g].transpose() * nu;
    double li = 0.0;

    if (sample_.r[i]) {
      const int j = event_node_[i];
      const auto ny = node_basis_.row(j);
      const Normalizer nz = normalize(hmat[g] * ny.transpose(), want_grad);
      li = alpha * v - ev * cum[j] + log_lam[j] + ny.dot(ci) - nz.log_z;
      if (want_grad) {
        dalpha += v - v * ev * cum[j];
        dxi += ny.transpose() - ev * dcum.row(j).transpose();
        dh[g].noalias() += (nu - nz.mean) * ny;
      }
    } else {
      logs.clear();
      term_node.clear();
      term_norm.clear();
      own_norm.clear();
      own_norm.reserve(partial_terms_[i].size());
      for (const Term& t : partial_terms_[i]) {
        const auto ny = node_basis_.row(t.node);
        own_norm.push_back(normalize(hmat[g] * ny.transpose(), want_grad));
        logs.push_back(std::log(t.weight) - ev * cum[t.node] + alpha * v + log_lam[t.node] + ny.dot(ci) -
                       own_norm.back().log_z);
        term_node.push_back(t.node);
        term_norm.push_back(&own_norm.back());
      }
      for (int k = first_full_panel_[i]; k < panels; ++k) {
        const double width = edges_[k + 1] - edges_[k];
        for (int r = 0; r < rn; ++r) {
          const std::size_t s = static_cast<std::size_t>(k * rn + r);
          const int j = shared_nodes_[s];
          const Normalizer& nz = shared_norm[g][s];
          logs.push_back(std::log(rule_.weights[r] * width) - ev * cum[j] + alpha * v + log_lam[j] +
                         node_basis_.row(j).dot(ci) - nz.log_z);
          term_node.push_back(j);
          term_norm.push_back(&nz);
        }
      }
      const double log_atom = -ev * cum_tau + nu.dot(h2[g]) - norm2[g].log_z;
      double top = log_atom;
      for (double l : logs) top = std::max(top, l);
      double acc = std::exp(log_atom - top);
      for (double l : logs) acc += std::exp(l - top);
      li = top + std::log(acc);
      if (!std::isfinite(li) || !(acc > 0.0)) {
        std::ostringstream msg;
        msg << "objective: non-finite censored log-likelihood at record " << i;
        throw std::runtime_error(msg.str());
      }
      if (want_grad) {
        Eigen::VectorXd sy = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd sdl = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd smy = Eigen::MatrixXd::Zero(p, p);
        double sa = 0.0;
        for (std::size_t t = 0; t < logs.size(); ++t) {
          const double pi = std::exp(logs[t] - top) / acc;
          const int j = term_node[t];
          const auto ny = node_basis_.row(j);
          sa += pi * (1.0 - ev * cum[j]);
          sy.noalias() += pi * ny.transpose();
          sdl.noalias() += pi * dcum.row(j).transpose();
          smy.noalias() += (pi * term_norm[t]->mean) * ny;
        }
        const double pa = std::exp(log_atom - top) / acc;
        dalpha += v * sa - pa * v * ev * cum_tau;
        dxi += sy - ev * (sdl + pa * dlam_edge.row(panels).transpose());
        dh[g].noalias() += nu * sy.transpose() - smy;
        dh2[g] += pa * (nu - norm2[g].mean);
      }
    }
    if (per_obs) (*per_obs)[static_cast<Eigen::Index>(i)] = li;
    total += li;
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  const double lambda_pen = options_.penalty_weight;
  if (want_grad) {
    grad->alpha = dalpha * inv_n;
    grad->xi = dxi * inv_n - 2.0 * lambda_pen * xi;
    for (int c = 0; c < layout_.q(); ++c) {
      grad->eta1[c].setZero();
      for (std::size_t g = 0; g < ngroups; ++g) {
        const double phi = group_phi_[g][c];
        if (phi != 0.0) grad->eta1[c] += phi * dh[g];
      }
      grad->eta1[c] = grad->eta1[c] * inv_n - 2.0 * lambda_pen * params.eta1[c];
    }
    grad->eta2.setZero();
    for (std::size_t g = 0; g < ngroups; ++g) grad->eta2 += dh2[g] * group_phi_[g].transpose();
    grad->eta2 = grad->eta2 * inv_n - 2.0 * lambda_pen * params.eta2;
    grad->pin();
  }
  return total * inv_n - penalty(params);
}

double loglik_obs(const SieveParams& params, const Observation& obs, double u, const ObjectiveOptions& options) {
  ReducedSample one;
  one.tau = params.layout.tau;
  one.y = {obs.y};
  one.r = {static_cast<char>(obs.r ? 1 : 0)};
  one.u = {u};
  one.v = {obs.v};
  Objective objective(std::move(one), params.layout, options);
  return objective.per_observation(params)[0];
}

}  // namespace dcsieve
