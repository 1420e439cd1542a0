#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcsieve/cox.hpp"
#include "dcsieve/data.hpp"
#include "dcsieve/estimator.hpp"

namespace dcsieve {

struct ScenarioConfig {
  double beta0 = 0.0;
  /// Censoring working-model covariates, subset of {x1, x2, v}.
  std::string censor_covariates = "x1,x2,v";
  int n = 200;
  int reps = 200;
  std::uint64_t seed = 1;
  double censor_scale = 4.0;
  double censor_power = 0.0;
};

struct StudyConfig {
  std::vector<ScenarioConfig> scenarios;
  EstimatorConfig estimator;
  int histogram_bins = 20;
  double alpha_true = 1.0;
  /// Abort a scenario when more than this fraction of reps fail.
  double max_failure_fraction = 0.1;

  void validate() const;
  static StudyConfig from_json_text(const std::string& text);
  static StudyConfig load(const std::string& path);
};

/// Everything produced for one dataset.
struct SingleFit {
  CoxFit gamma_fit;
  FitResult fit;
  VarianceEstimate var;
  double naive = 0.0;
  double censoring = 0.0;
};

SingleFit fit_once(const Dataset& data, const CovariateSet& covariates, const EstimatorConfig& config);
std::string single_fit_to_json(const SingleFit& result, const Dataset& data);

struct RepResult {
  int index = 0;
  bool ok = false;
  double alpha = 0.0;
  double se = 0.0;
  double naive = 0.0;
  double censoring = 0.0;
  std::string error;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<int> counts;
};

Histogram make_histogram(const std::vector<double>& values, int bins);

struct ScenarioReport {
  ScenarioConfig config;
  bool t_model_correct = false;
  bool c_model_correct = false;
  int completed = 0;
  int failed = 0;
  double naive_mean = 0.0;
  double alpha_mean = 0.0;
  /// Absent with fewer than two completed reps.
  std::optional<double> alpha_sd;
  double median_se = 0.0;
  double coverage95 = 0.0;
  double censoring_mean = 0.0;
  Histogram histogram;
  std::vector<RepResult> reps;

  std::string working_models() const;
};

struct StudyReport {
  std::vector<ScenarioReport> scenarios;
};

/// T-model (T independent of X given V) holds iff beta0 = 0; C-model holds iff x1 is included.
bool t_model_correct(double beta0);
bool c_model_correct(const CovariateSet& covariates);

/// One replicate: generate, fit gamma, maximize, variance.
RepResult run_rep(const ScenarioConfig& scenario, const EstimatorConfig& config, int index);

/// Aggregate rep results (already ordered by index).
ScenarioReport summarize(const ScenarioConfig& scenario, std::vector<RepResult> reps, int bins, double alpha_true);

/// Worker count from DCSIEVE_WORKERS, else the hardware concurrency.
int workers_from_env();

/// Throws std::runtime_error when a scenario exceeds the failure budget.
StudyReport run_study(const StudyConfig& config, int workers = 0);

std::string report_to_json(const StudyReport& report);
/// Writes table1.csv, histogram_<k>.csv, reps_<k>.csv and report.json into `dir`.
void emit(const StudyReport& report, const std::string& dir);

}  // namespace dcsieve
