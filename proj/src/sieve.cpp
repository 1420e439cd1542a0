#include "dcsieve/sieve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dcsieve {

namespace {

constexpr double kCategoryTol = 1e-12;

int find_category(const std::vector<double>& categories, double v) {
  for (std::size_t c = 0; c < categories.size(); ++c)
    if (std::abs(categories[c] - v) <= kCategoryTol) return static_cast<int>(c);
  std::ostringstream msg;
  msg << "treatment value " << v << " is not a known category";
  throw std::invalid_argument(msg.str());
}

// Integral over [0,1] of exp(basis(u) . coef), Gauss-Legendre on each knot interval.
double log_normalizer(const SplineBasis& basis, const Eigen::VectorXd& coef, int u_points) {
  const PanelRule gl = gauss_legendre_panel(u_points);
  const int kn = basis.intervals();
  std::vector<double> expo;
  std::vector<double> weight;
  for (int k = 0; k < kn; ++k) {
    for (std::size_t r = 0; r < gl.nodes.size(); ++r) {
      const double u = (k + gl.nodes[r]) / kn;
      expo.push_back(basis.eval(u).dot(coef));
      weight.push_back(gl.weights[r] / kn);
    }
  }
  const double top = *std::max_element(expo.begin(), expo.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < expo.size(); ++i) acc += weight[i] * std::exp(expo[i] - top);
  return top + std::log(acc);
}

// eta1 collapsed over v and y: the u-coefficient vector at (y, v).
Eigen::VectorXd eta1_u_coef(const SieveParams& params, double y, double v) {
  const auto& lay = params.layout;
  const Eigen::VectorXd phi = lay.v_factor(v);
  const Eigen::VectorXd ny = lay.basis.eval(y / lay.tau);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(lay.p());
  for (int c = 0; c < lay.q(); ++c)
    if (phi[c] != 0.0) out += phi[c] * (params.eta1[c] * ny);
  return out;
}

Eigen::VectorXd eta2_u_coef(const SieveParams& params, double v) {
  return params.eta2 * params.layout.v_factor(v);
}

}  // namespace

std::vector<double> treatment_categories(const Dataset& data) {
  std::vector<double> cats;
  for (const auto& o : data.observations) {
    bool seen = false;
    for (double c : cats) seen = seen || std::abs(c - o.v) <= kCategoryTol;
    if (!seen) cats.push_back(o.v);
  }
  std::sort(cats.begin(), cats.end());
  return cats;
}

VMode resolve_v_mode(VMode mode, const Dataset& data) {
  if (mode != VMode::Auto) return mode;
  return treatment_categories(data).size() <= static_cast<std::size_t>(kMaxCategories) ? VMode::Discrete
                                                                                       : VMode::Continuous;
}

std::string to_string(VMode mode) {
  switch (mode) {
    case VMode::Auto: return "auto";
    case VMode::Discrete: return "discrete";
    case VMode::Continuous: return "continuous";
  }
  return "auto";
}

VMode v_mode_from_string(const std::string& name) {
  if (name == "auto") return VMode::Auto;
  if (name == "discrete") return VMode::Discrete;
  if (name == "continuous") return VMode::Continuous;
  throw std::invalid_argument("unknown treatment mode: " + name);
}

double linear_index(const Observation& obs, const CovariateSet& covariates, const Eigen::VectorXd& gamma, int d) {
  if (static_cast<std::size_t>(gamma.size()) != covariates.size())
    throw std::invalid_argument("linear_index: gamma has wrong dimension");
  double acc = 0.0;
  for (std::size_t k = 0; k < covariates.size(); ++k)
    acc += gamma[static_cast<Eigen::Index>(k)] * CovariateSet::value(obs, covariates.columns[k], d);
  return acc;
}

int SupportBounds::category_of(double v) const { return find_category(categories, v); }

SupportBounds::Interval SupportBounds::at(double v) const {
  if (discrete) {
    const int c = category_of(v);
    return {lower[c], upper[c], margin[c]};
  }
  const auto lo = std::lower_bound(sample_v.begin(), sample_v.end(), v - window - kCategoryTol);
  const auto hi = std::upper_bound(sample_v.begin(), sample_v.end(), v + window + kCategoryTol);
  if (hi - lo < 2) {
    std::ostringstream msg;
    msg << "support bounds: fewer than 2 records within the window around v = " << v;
    throw std::invalid_argument(msg.str());
  }
  const auto first = sample_index.begin() + (lo - sample_v.begin());
  const auto last = sample_index.begin() + (hi - sample_v.begin());
  const auto [mn, mx] = std::minmax_element(first, last);
  if (!(*mx > *mn)) throw std::invalid_argument("degenerate index");
  return {*mn - global_margin, *mx + global_margin, global_margin};
}

SupportBounds estimate_support(const Dataset& data, const CovariateSet& covariates, const Eigen::VectorXd& gamma,
                               VMode mode, double window) {
  data.validate();
  if (!gamma.allFinite()) throw std::invalid_argument("support bounds: gamma must be finite");
  SupportBounds bounds;
  const VMode resolved = resolve_v_mode(mode, data);
  std::vector<double> index(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) index[i] = linear_index(data.observations[i], covariates, gamma, data.d);

  if (resolved == VMode::Discrete) {
    bounds.discrete = true;
    bounds.categories = treatment_categories(data);
    const std::size_t nc = bounds.categories.size();
    std::vector<double> mn(nc, std::numeric_limits<double>::infinity());
    std::vector<double> mx(nc, -std::numeric_limits<double>::infinity());
    std::vector<int> count(nc, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const int c = find_category(bounds.categories, data.observations[i].v);
      mn[c] = std::min(mn[c], index[i]);
      mx[c] = std::max(mx[c], index[i]);
      ++count[c];
    }
    for (std::size_t c = 0; c < nc; ++c) {
      if (count[c] < 2) throw std::invalid_argument("support bounds: a treatment category has fewer than 2 records");
      if (!(mx[c] > mn[c])) throw std::invalid_argument("degenerate index");
      const double delta = bounds.relative_margin * (mx[c] - mn[c]);
      bounds.lower.push_back(mn[c] - delta);
      bounds.upper.push_back(mx[c] + delta);
      bounds.margin.push_back(delta);
    }
    return bounds;
  }

  bounds.discrete = false;
  bounds.window = window;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data.observations[a].v < data.observations[b].v; });
  for (std::size_t i : order) {
    bounds.sample_v.push_back(data.observations[i].v);
    bounds.sample_index.push_back(index[i]);
  }
  const auto [gmn, gmx] = std::minmax_element(index.begin(), index.end());
  if (!(*gmx > *gmn)) throw std::invalid_argument("degenerate index");
  bounds.global_margin = bounds.relative_margin * (*gmx - *gmn);
  for (const auto& o : data.observations) (void)bounds.at(o.v);
  return bounds;
}

double u_transform(double index, double v, const SupportBounds& bounds) {
  const auto iv = bounds.at(v);
  if (index < iv.a - iv.delta || index > iv.b + iv.delta) {
    std::ostringstream msg;
    msg << "u_transform: index " << index << " outside support [" << iv.a << ", " << iv.b << "]";
    throw std::domain_error(msg.str());
  }
  return std::clamp((index - iv.a) / (iv.b - iv.a), 0.0, 1.0);
}

double u_transform(const Observation& obs, const CovariateSet& covariates, const Eigen::VectorXd& gamma, int d,
                   const SupportBounds& bounds) {
  return u_transform(linear_index(obs, covariates, gamma, d), obs.v, bounds);
}

Eigen::VectorXd SieveLayout::v_factor(double v) const {
  if (!discrete_v) return basis.eval(v);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(q());
  phi[category_of(v)] = 1.0;
  return phi;
}

int SieveLayout::category_of(double v) const { return find_category(categories, v); }

SieveLayout make_layout(const Dataset& data, int m, int kn, VMode mode) {
  SieveLayout layout;
  layout.basis = SplineBasis(m, kn);
  layout.tau = data.tau;
  layout.discrete_v = resolve_v_mode(mode, data) == VMode::Discrete;
  if (layout.discrete_v) layout.categories = treatment_categories(data);
  return layout;
}

SieveParams SieveParams::zeros(const SieveLayout& layout, double alpha, double bigM) {
  SieveParams params;
  params.layout = layout;
  params.alpha = alpha;
  params.bigM = bigM;
  const int p = layout.p();
  params.xi = Eigen::VectorXd::Zero(p);
  params.eta1.assign(static_cast<std::size_t>(layout.q()), Eigen::MatrixXd::Zero(p, p));
  params.eta2 = Eigen::MatrixXd::Zero(p, layout.q());
  return params;
}

Eigen::VectorXd SieveParams::pack() const {
  const int p = layout.p();
  Eigen::VectorXd out(layout.free_count());
  Eigen::Index k = 0;
  out[k++] = alpha;
  for (int j = 0; j < p; ++j) out[k++] = xi[j];
  for (const auto& block : eta1)
    for (int a = 1; a < p; ++a)
      for (int b = 0; b < p; ++b) out[k++] = block(a, b);
  for (int a = 1; a < p; ++a)
    for (int c = 0; c < layout.q(); ++c) out[k++] = eta2(a, c);
  return out;
}

void SieveParams::unpack(const Eigen::VectorXd& free) {
  if (free.size() != layout.free_count()) throw std::invalid_argument("SieveParams::unpack: wrong length");
  const int p = layout.p();
  Eigen::Index k = 0;
  alpha = free[k++];
  for (int j = 0; j < p; ++j) xi[j] = free[k++];
  for (auto& block : eta1) {
    block.row(0).setZero();
    for (int a = 1; a < p; ++a)
      for (int b = 0; b < p; ++b) block(a, b) = free[k++];
  }
  eta2.row(0).setZero();
  for (int a = 1; a < p; ++a)
    for (int c = 0; c < layout.q(); ++c) eta2(a, c) = free[k++];
}

void SieveParams::pin() {
  for (auto& block : eta1) block.row(0).setZero();
  eta2.row(0).setZero();
}

double SieveParams::spline_sum_squares() const {
  double acc = xi.squaredNorm() + eta2.squaredNorm();
  for (const auto& block : eta1) acc += block.squaredNorm();
  return acc;
}

std::array<double, 3> SieveParams::l1_norms() const {
  double e1 = 0.0;
  for (const auto& block : eta1) e1 += block.cwiseAbs().sum();
  return {xi.cwiseAbs().sum(), e1, eta2.cwiseAbs().sum()};
}

double xi_at(const SieveParams& params, double y) {
  return params.layout.basis.eval(y / params.layout.tau).dot(params.xi);
}

double eta1_at(const SieveParams& params, double u, double y, double v) {
  return params.layout.basis.eval(u).dot(eta1_u_coef(params, y, v));
}

double eta2_at(const SieveParams& params, double u, double v) {
  return params.layout.basis.eval(u).dot(eta2_u_coef(params, v));
}

double lambda_at(const SieveParams& params, double y) { return std::exp(xi_at(params, y)); }

double cum_hazard(const SieveParams& params, double y, const QuadratureRule& rule) {
  rule.validate();
  const double tau = params.layout.tau;
  if (!(y >= 0.0 && y <= tau)) throw std::domain_error("cum_hazard: y outside [0, tau]");
  const auto edges = aligned_panel_edges(tau, params.layout.basis.intervals(), rule.panels);
  const PanelRule pr = panel_rule(rule);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size() && edges[k] < y; ++k) {
    const double lo = edges[k];
    const double hi = std::min(edges[k + 1], y);
    const double width = hi - lo;
    for (std::size_t r = 0; r < pr.nodes.size(); ++r)
      total += pr.weights[r] * width * lambda_at(params, lo + pr.nodes[r] * width);
  }
  return total;
}

double eta1_normalizer(const SieveParams& params, double y, double v, int u_points) {
  return std::exp(log_normalizer(params.layout.basis, eta1_u_coef(params, y, v), u_points));
}

double eta2_normalizer(const SieveParams& params, double v, int u_points) {
  return std::exp(log_normalizer(params.layout.basis, eta2_u_coef(params, v), u_points));
}

double f_density(const SieveParams& params, double u, double y, double v, int u_points) {
  const Eigen::VectorXd coef = eta1_u_coef(params, y, v);
  const SplineBasis& basis = params.layout.basis;
  return std::exp(basis.eval(u).dot(coef) - log_normalizer(basis, coef, u_points));
}

double g_density(const SieveParams& params, double u, double v, int u_points) {
  const Eigen::VectorXd coef = eta2_u_coef(params, v);
  const SplineBasis& basis = params.layout.basis;
  return std::exp(basis.eval(u).dot(coef) - log_normalizer(basis, coef, u_points));
}

SieveSchedule asymptotic_schedule(int n, int k, double m_tilde, double beta) {
  if (n < 2) throw std::invalid_argument("asymptotic_schedule: n must be >= 2");
  if (k < 11) throw std::invalid_argument("asymptotic_schedule: k must be >= 11");
  if (!(m_tilde > 0.0)) throw std::invalid_argument("asymptotic_schedule: Mtilde must be positive");
  const double lo = 1.0 / (2.0 * k);
  const double hi = 3.0 / (4.0 * k + 9.0);
  if (beta < 0.0) beta = 0.5 * (lo + hi);
  if (!(beta > lo && beta < hi)) throw std::invalid_argument("asymptotic_schedule: beta outside (1/(2k), 3/(4k+9))");
  SieveSchedule s;
  s.m = k + 2;
  s.kn = std::max(1, static_cast<int>(std::ceil(m_tilde * std::pow(static_cast<double>(n), beta))));
  s.bound = m_tilde * std::sqrt(std::log(static_cast<double>(n)));
  return s;
}

std::string params_to_json(const SieveParams& params) {
  nlohmann::json j;
  const auto& lay = params.layout;
  j["basis"] = {{"m", lay.basis.m()}, {"kn", lay.basis.intervals()}};
  j["discrete_v"] = lay.discrete_v;
  j["categories"] = lay.categories;
  j["tau"] = lay.tau;
  j["alpha"] = params.alpha;
  j["bigM"] = params.bigM;
  j["xi"] = std::vector<double>(params.xi.data(), params.xi.data() + params.xi.size());
  nlohmann::json e1 = nlohmann::json::array();
  for (const auto& block : params.eta1) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index a = 0; a < block.rows(); ++a) {
      std::vector<double> row(block.cols());
      for (Eigen::Index b = 0; b < block.cols(); ++b) row[b] = block(a, b);
      rows.push_back(row);
    }
    e1.push_back(rows);
  }
  j["eta1"] = e1;
  nlohmann::json e2 = nlohmann::json::array();
  for (Eigen::Index a = 0; a < params.eta2.rows(); ++a) {
    std::vector<double> row(params.eta2.cols());
    for (Eigen::Index c = 0; c < params.eta2.cols(); ++c) row[c] = params.eta2(a, c);
    e2.push_back(row);
  }
  j["eta2"] = e2;
  const auto l1 = params.l1_norms();
  j["l1_norms"] = {{"xi", l1[0]}, {"eta1", l1[1]}, {"eta2", l1[2]}};
  return j.dump(2);
}

SieveParams params_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SieveLayout layout;
  layout.basis = SplineBasis(j.at("basis").at("m").get<int>(), j.at("basis").at("kn").get<int>());
  layout.discrete_v = j.at("discrete_v").get<bool>();
  layout.categories = j.at("categories").get<std::vector<double>>();
  layout.tau = j.at("tau").get<double>();
  SieveParams params = SieveParams::zeros(layout, j.at("alpha").get<double>(), j.value("bigM", 10.0));
  const int p = layout.p();
  const auto xi = j.at("xi").get<std::vector<double>>();
  if (static_cast<int>(xi.size()) != p) throw std::invalid_argument("params json: xi has wrong length");
  for (int k = 0; k < p; ++k) params.xi[k] = xi[k];
  const auto& e1 = j.at("eta1");
  if (static_cast<int>(e1.size()) != layout.q()) throw std::invalid_argument("params json: eta1 has wrong shape");
  for (int c = 0; c < layout.q(); ++c) {
    const auto rows = e1[c].get<std::vector<std::vector<double>>>();
    if (static_cast<int>(rows.size()) != p) throw std::invalid_argument("params json: eta1 has wrong shape");
    for (int a = 0; a < p; ++a) {
      if (static_cast<int>(rows[a].size()) != p) throw std::invalid_argument("params json: eta1 has wrong shape");
      for (int b = 0; b < p; ++b) params.eta1[c](a, b) = rows[a][b];
    }
  }
  const auto e2 = j.at("eta2").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(e2.size()) != p) throw std::invalid_argument("params json: eta2 has wrong shape");
  for (int a = 0; a < p; ++a) {
    if (static_cast<int>(e2[a].size()) != layout.q()) throw std::invalid_argument("params json: eta2 has wrong shape");
    for (int c = 0; c < layout.q(); ++c) params.eta2(a, c) = e2[a][c];
  }
  params.pin();
  return params;
}

}  // namespace dcsieve
