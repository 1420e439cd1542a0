#include "dcsieve/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dcsieve {

namespace {

std::string row_error(std::size_t row, const std::string& what) {
  std::ostringstream msg;
  msg << "row " << row << ": " << what;
  return msg.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, std::size_t row) {
  const std::string t = trim(cell);
  if (t.empty()) throw std::invalid_argument(row_error(row, "empty field"));
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(row_error(row, "malformed number '" + t + "'"));
  }
  if (used != t.size()) throw std::invalid_argument(row_error(row, "malformed number '" + t + "'"));
  if (!std::isfinite(value)) throw std::invalid_argument(row_error(row, "non-finite value"));
  return value;
}

}  // namespace

void Dataset::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("dataset: tau must be positive");
  if (observations.empty()) throw std::invalid_argument("no observations");
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    if (static_cast<int>(o.x.size()) != d) throw std::invalid_argument(row_error(i, "inconsistent covariate width"));
    if (!std::isfinite(o.y) || o.y < 0.0 || o.y > tau) throw std::invalid_argument(row_error(i, "y outside [0, tau]"));
    if (!std::isfinite(o.v) || o.v < 0.0 || o.v > 1.0) throw std::invalid_argument(row_error(i, "v outside [0, 1]"));
    for (double xi : o.x)
      if (!std::isfinite(xi)) throw std::invalid_argument(row_error(i, "non-finite covariate"));
  }
}

void Dataset::validate_for_fitting() const {
  validate();
  const auto events = std::count_if(observations.begin(), observations.end(), [](const Observation& o) { return o.r; });
  if (events == 0) throw std::invalid_argument("dataset has no uncensored observations");
  if (events == static_cast<long>(observations.size())) throw std::invalid_argument("dataset has no censored observations");
}

CovariateSet CovariateSet::all(int d) {
  CovariateSet set;
  for (int j = 0; j <= d; ++j) set.columns.push_back(j);
  return set;
}

CovariateSet CovariateSet::parse(const std::string& spec, int d) {
  CovariateSet set;
  for (const auto& raw : split(spec, ',')) {
    const std::string name = trim(raw);
    if (name.empty()) continue;
    int col = -1;
    if (name == "v" || name == "V") {
      col = d;
    } else if ((name[0] == 'x' || name[0] == 'X') && name.size() > 1) {
      try {
        std::size_t used = 0;
        const int k = std::stoi(name.substr(1), &used);
        if (used == name.size() - 1 && k >= 1 && k <= d) col = k - 1;
      } catch (const std::exception&) {
      }
    }
    if (col < 0) throw std::invalid_argument("unknown covariate '" + name + "'");
    if (set.contains(col)) throw std::invalid_argument("duplicate covariate '" + name + "'");
    set.columns.push_back(col);
  }
  if (set.columns.empty()) throw std::invalid_argument("empty covariate set");
  std::sort(set.columns.begin(), set.columns.end());
  return set;
}

std::string CovariateSet::to_string(int d) const {
  std::string out;
  for (int col : columns) {
    if (!out.empty()) out += ',';
    out += (col == d) ? std::string("v") : "x" + std::to_string(col + 1);
  }
  return out;
}

bool CovariateSet::contains(int col) const {
  return std::find(columns.begin(), columns.end(), col) != columns.end();
}

double CovariateSet::value(const Observation& obs, int col, int d) {
  return col == d ? obs.v : obs.x[static_cast<std::size_t>(col)];
}

void SimScenario::validate() const {
  if (n < 2) throw std::invalid_argument("scenario: n must be >= 2");
  if (!(tau > 0.0)) throw std::invalid_argument("scenario: tau must be positive");
  if (!(censor_scale > 0.0) || censor_power < 0.0) throw std::invalid_argument("scenario: invalid censoring hazard");
  if (!std::isfinite(beta0)) throw std::invalid_argument("scenario: beta0 must be finite");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over a combined key.
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + (index + 1) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Dataset generate(const SimScenario& scenario) {
  scenario.validate();
  Dataset data;
  data.tau = scenario.tau;
  data.d = 2;
  data.observations.reserve(scenario.n);
  data.latent.reserve(scenario.n);
  const double p1 = scenario.censor_power + 1.0;
  for (int i = 0; i < scenario.n; ++i) {
    std::mt19937_64 rng(mix_seed(scenario.seed, static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    const double v = unif(rng) < 0.5 ? 0.0 : 1.0;
    // Lambda_T(t) = 1.5 t^2 e^v
    const double t = std::sqrt(expo(rng) / (1.5 * std::exp(v)));
    const double theta = unif(rng) - 0.5;
    const double x1 = scenario.beta0 * t + 0.5 * theta;
    const double x2 = unif(rng);
    const double rate = scenario.censor_scale * std::exp(2.0 * x1 - 4.0 * x2 - 0.1 * v);
    // Lambda_C(t) = rate t^p1 / p1
    const double c0 = std::pow(p1 * expo(rng) / rate, 1.0 / p1);
    const double c = std::min(c0, scenario.tau);
    Observation obs;
    obs.y = std::min(t, c);
    obs.r = t <= c;
    obs.x = {x1, x2};
    obs.v = v;
    data.observations.push_back(std::move(obs));
    data.latent.push_back({t, c0, theta});
  }
  return data;
}

double censoring_rate(const Dataset& dataset) {
  if (dataset.observations.empty()) throw std::invalid_argument("no observations");
  const auto censored = std::count_if(dataset.observations.begin(), dataset.observations.end(),
                                      [](const Observation& o) { return !o.r; });
  return static_cast<double>(censored) / dataset.observations.size();
}

double administrative_rate(const Dataset& dataset) {
  if (dataset.observations.empty()) throw std::invalid_argument("no observations");
  const auto admin = std::count_if(dataset.observations.begin(), dataset.observations.end(),
                                   [&](const Observation& o) { return !o.r && o.y >= dataset.tau; });
  return static_cast<double>(admin) / dataset.observations.size();
}

Dataset load_csv(const std::string& path, double tau) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw std::invalid_argument("no observations");
  const auto header = split(trim(line), ',');
  if (header.size() < 3 || trim(header[0]) != "y" || trim(header[1]) != "r" || trim(header.back()) != "v")
    throw std::invalid_argument("header must be y,r,x1,...,xd,v");
  const int d = static_cast<int>(header.size()) - 3;
  for (int j = 0; j < d; ++j) {
    if (trim(header[2 + j]) != "x" + std::to_string(j + 1))
      throw std::invalid_argument("header must be y,r,x1,...,xd,v");
  }
  Dataset data;
  data.d = d;
  data.tau = tau;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) throw std::invalid_argument(row_error(row, "inconsistent width"));
    Observation obs;
    obs.y = parse_number(cells[0], row);
    const double r = parse_number(cells[1], row);
    if (r != 0.0 && r != 1.0) throw std::invalid_argument(row_error(row, "r must be 0 or 1"));
    obs.r = r == 1.0;
    obs.x.resize(d);
    for (int j = 0; j < d; ++j) obs.x[j] = parse_number(cells[2 + j], row);
    obs.v = parse_number(cells.back(), row);
    data.observations.push_back(std::move(obs));
    ++row;
  }
  if (data.observations.empty()) throw std::invalid_argument("no observations");
  data.validate();
  return data;
}

void write_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "y,r";
  for (int j = 0; j < dataset.d; ++j) out << ",x" << (j + 1);
  out << ",v\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& o : dataset.observations) {
    out << o.y << ',' << (o.r ? 1 : 0);
    for (double xi : o.x) out << ',' << xi;
    out << ',' << o.v << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

SimScenario scenario_from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SimScenario s;
  s.beta0 = j.value("beta0", s.beta0);
  s.n = j.value("n", s.n);
  s.seed = j.value("seed", s.seed);
  s.tau = j.value("tau", s.tau);
  s.censor_covariates = j.value("censor_covariates", s.censor_covariates);
  s.censor_scale = j.value("censor_scale", s.censor_scale);
  s.censor_power = j.value("censor_power", s.censor_power);
  s.validate();
  return s;
}

SimScenario load_scenario_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str());
}

}  // namespace dcsieve
