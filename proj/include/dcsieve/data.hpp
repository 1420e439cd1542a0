#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dcsieve {

/// One right-censored record: Y = min(T, C), R = I(T <= C), auxiliary X, treatment V.
struct Observation {
  double y = 0.0;
  bool r = false;
  std::vector<double> x;
  double v = 0.0;
};

/// Quantities drawn during simulation that estimators never see.
struct Latent {
  double t = 0.0;       // failure time
  double c0 = 0.0;      // censoring time before truncation at tau
  double theta = 0.0;   // noise in the surrogate covariate
};

struct Dataset {
  std::vector<Observation> observations;
  double tau = 1.0;
  int d = 0;
  /// Filled only by generate(); parallel to observations.
  std::vector<Latent> latent;

  std::size_t size() const { return observations.size(); }
  /// Throws std::invalid_argument naming the first violating row.
  void validate() const;
  /// validate() plus at least one event and one censored record.
  void validate_for_fitting() const;
};

/// Columns of W = (x_1, ..., x_d, v). Indices 0..d-1 are x, index d is v.
struct CovariateSet {
  std::vector<int> columns;

  static CovariateSet parse(const std::string& spec, int d);
  static CovariateSet only_v(int d) { return CovariateSet{{d}}; }
  static CovariateSet all(int d);
  std::string to_string(int d) const;
  std::size_t size() const { return columns.size(); }
  bool contains(int col) const;
  /// Value of column `col` of W for the given record.
  static double value(const Observation& obs, int col, int d);
};

/// Simulation design: V ~ Bernoulli(1/2), T with hazard 3t e^V,
/// X1 = beta0 T + 0.5 theta, X2 ~ U[0,1], censoring hazard
/// censor_scale * t^censor_power * exp(2 X1 - 4 X2 - 0.1 V), C = min(C0, tau).
struct SimScenario {
  double beta0 = 0.0;
  int n = 200;
  std::uint64_t seed = 1;
  double tau = 1.0;
  /// Censoring working-model covariates used downstream (not by the generator).
  std::string censor_covariates = "x1,x2,v";
  double censor_scale = 4.0;
  double censor_power = 0.0;

  void validate() const;
};

Dataset generate(const SimScenario& scenario);

double censoring_rate(const Dataset& dataset);
/// Fraction of records censored exactly at tau.
double administrative_rate(const Dataset& dataset);

Dataset load_csv(const std::string& path, double tau = 1.0);
void write_csv(const Dataset& dataset, const std::string& path);

SimScenario load_scenario_json(const std::string& path);
SimScenario scenario_from_json_text(const std::string& text);

/// Deterministic 64-bit mixer used for per-observation and per-replicate streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace dcsieve
