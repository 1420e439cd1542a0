#include "dcsieve/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace dcsieve {

namespace {

using nlohmann::json;

std::vector<double> to_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

void StudyConfig::validate() const {
  if (scenarios.empty()) throw std::invalid_argument("study: no scenarios");
  for (const auto& s : scenarios) {
    if (s.reps < 1) throw std::invalid_argument("study: reps must be >= 1");
    if (s.n < 10) throw std::invalid_argument("study: n must be >= 10");
    CovariateSet::parse(s.censor_covariates, 2);
  }
  if (histogram_bins < 1) throw std::invalid_argument("study: histogram_bins must be >= 1");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0))
    throw std::invalid_argument("study: max_failure_fraction must lie in [0,1]");
  estimator.rule.validate();
}

StudyConfig StudyConfig::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  StudyConfig c;
  for (const auto& s : j.at("scenarios")) {
    ScenarioConfig sc;
    sc.beta0 = s.value("beta0", sc.beta0);
    sc.censor_covariates = s.value("censor_covariates", sc.censor_covariates);
    sc.n = s.value("n", sc.n);
    sc.reps = s.value("reps", sc.reps);
    sc.seed = s.value("seed", sc.seed);
    sc.censor_scale = s.value("censor_scale", sc.censor_scale);
    sc.censor_power = s.value("censor_power", sc.censor_power);
    c.scenarios.push_back(sc);
  }
  EstimatorConfig& e = c.estimator;
  if (j.contains("sieve")) {
    e.m = j["sieve"].value("m", e.m);
    e.kn = j["sieve"].value("kn", e.kn);
  }
  e.penalty_weight = j.value("penalty_weight", e.penalty_weight);
  if (j.contains("quadrature")) {
    const auto& q = j["quadrature"];
    e.rule.panels = q.value("panels", e.rule.panels);
    e.rule.points = q.value("points", e.rule.points);
    if (q.contains("scheme")) e.rule.scheme = quad_scheme_from_string(q["scheme"].get<std::string>());
  }
  e.eps_scale = j.value("eps_scale", e.eps_scale);
  e.eps_tilde_scale = j.value("eps_tilde_scale", e.eps_tilde_scale);
  e.alpha_init = j.value("alpha_init", e.alpha_init);
  e.bigM = j.value("bound", e.bigM);
  if (j.contains("v_mode")) e.v_mode = v_mode_from_string(j["v_mode"].get<std::string>());
  c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
  c.alpha_true = j.value("alpha_true", c.alpha_true);
  c.max_failure_fraction = j.value("max_failure_fraction", c.max_failure_fraction);
  c.validate();
  return c;
}

StudyConfig StudyConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open study config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

SingleFit fit_once(const Dataset& data, const CovariateSet& covariates, const EstimatorConfig& config) {
  SingleFit out;
  out.naive = naive_alpha(data);
  out.censoring = censoring_rate(data);
  out.gamma_fit = fit_cox(data, EventRole::Censoring, covariates);
  out.fit = maximize(data, out.gamma_fit, config);
  const ProfileContext ctx(data, out.gamma_fit, out.fit, config);
  out.var = variance(data, ctx, out.gamma_fit, ctx.default_eps(), ctx.default_eps_tilde());
  return out;
}

std::string single_fit_to_json(const SingleFit& result, const Dataset& data) {
  json j;
  j["n"] = data.size();
  j["censoring_rate"] = result.censoring;
  j["naive_alpha"] = result.naive;
  j["gamma"] = {{"covariates", result.gamma_fit.covariates.to_string(data.d)},
                {"coef", to_vector(result.gamma_fit.coef)},
                {"iterations", result.gamma_fit.iterations},
                {"converged", result.gamma_fit.converged}};
  j["fit"] = json::parse(fit_to_json(result.fit));
  j["variance"] = json::parse(variance_to_json(result.var));
  j["alpha_hat"] = result.fit.alpha_hat;
  j["se"] = result.var.se;
  return j.dump(2);
}

Histogram make_histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  Histogram h;
  h.counts.assign(bins, 0);
  if (values.empty()) {
    h.edges.assign(bins + 1, 0.0);
    return h;
  }
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double w = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(lo + b * w);
  h.edges.back() = hi;
  for (double v : values) {
    int b = static_cast<int>((v - lo) / w);
    h.counts[std::clamp(b, 0, bins - 1)] += 1;
  }
  return h;
}

std::string ScenarioReport::working_models() const {
  return std::string("T:") + (t_model_correct ? "correct" : "misspecified") +
         " C:" + (c_model_correct ? "correct" : "misspecified");
}

bool t_model_correct(double beta0) { return beta0 == 0.0; }

bool c_model_correct(const CovariateSet& covariates) { return covariates.contains(0); }

RepResult run_rep(const ScenarioConfig& scenario, const EstimatorConfig& config, int index) {
  RepResult r;
  r.index = index;
  try {
    SimScenario sim;
    sim.beta0 = scenario.beta0;
    sim.n = scenario.n;
    sim.seed = mix_seed(scenario.seed, static_cast<std::uint64_t>(index));
    sim.censor_scale = scenario.censor_scale;
    sim.censor_power = scenario.censor_power;
    sim.censor_covariates = scenario.censor_covariates;
    const Dataset data = generate(sim);
    const SingleFit fit = fit_once(data, CovariateSet::parse(scenario.censor_covariates, data.d), config);
    r.alpha = fit.fit.alpha_hat;
    r.se = fit.var.se;
    r.naive = fit.naive;
    r.censoring = fit.censoring;
    if (!std::isfinite(r.alpha) || !std::isfinite(r.se)) throw std::runtime_error("non-finite estimate");
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

ScenarioReport summarize(const ScenarioConfig& scenario, std::vector<RepResult> reps, int bins, double alpha_true) {
  ScenarioReport s;
  s.config = scenario;
  s.t_model_correct = t_model_correct(scenario.beta0);
  s.c_model_correct = c_model_correct(CovariateSet::parse(scenario.censor_covariates, 2));
  std::vector<double> alphas, ses;
  double naive_sum = 0.0, cens_sum = 0.0;
  int covered = 0;
  for (const auto& r : reps) {
    if (!r.ok) {
      ++s.failed;
      continue;
    }
    alphas.push_back(r.alpha);
    ses.push_back(r.se);
    naive_sum += r.naive;
    cens_sum += r.censoring;
    if (std::abs(r.alpha - alpha_true) <= 1.96 * r.se) ++covered;
  }
  s.completed = static_cast<int>(alphas.size());
  if (s.completed > 0) {
    const double k = s.completed;
    s.naive_mean = naive_sum / k;
    s.censoring_mean = cens_sum / k;
    double sum = 0.0;
    for (double a : alphas) sum += a;
    s.alpha_mean = sum / k;
    if (s.completed > 1) {
      double ss = 0.0;
      for (double a : alphas) ss += (a - s.alpha_mean) * (a - s.alpha_mean);
      s.alpha_sd = std::sqrt(ss / (k - 1.0));
    }
    s.median_se = median(ses);
    s.coverage95 = covered / k;
  }
  s.histogram = make_histogram(alphas, bins);
  s.reps = std::move(reps);
  return s;
}

int workers_from_env() {
  if (const char* env = std::getenv("DCSIEVE_WORKERS")) {
    char* end = nullptr;
    const long w = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && w >= 1) return static_cast<int>(w);
    throw std::invalid_argument(std::string("DCSIEVE_WORKERS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

StudyReport run_study(const StudyConfig& config, int workers) {
  config.validate();
  if (workers <= 0) workers = workers_from_env();
  StudyReport report;
  for (const auto& scenario : config.scenarios) {
    std::vector<RepResult> reps(scenario.reps);
    std::atomic<int> next{0};
    auto work = [&]() {
      for (int i = next++; i < scenario.reps; i = next++) reps[i] = run_rep(scenario, config.estimator, i);
    };
    const int k = std::min(workers, scenario.reps);
    if (k <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < k; ++t) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    ScenarioReport s = summarize(scenario, std::move(reps), config.histogram_bins, config.alpha_true);
    for (const auto& r : s.reps)
      if (!r.ok) std::clog << "rep " << r.index << " (beta0=" << scenario.beta0 << ") failed: " << r.error << "\n";
    if (s.failed > config.max_failure_fraction * scenario.reps) {
      std::ostringstream msg;
      msg << "study: " << s.failed << " of " << scenario.reps << " reps failed for beta0=" << scenario.beta0
          << " covariates=" << scenario.censor_covariates;
      for (const auto& r : s.reps)
        if (!r.ok) {
          msg << "; first failure (rep " << r.index << "): " << r.error;
          break;
        }
      throw std::runtime_error(msg.str());
    }
    report.scenarios.push_back(std::move(s));
  }
  return report;
}

std::string report_to_json(const StudyReport& report) {
  json out = json::array();
  for (const auto& s : report.scenarios) {
    json j;
    j["beta0"] = s.config.beta0;
    j["censor_covariates"] = s.config.censor_covariates;
    j["n"] = s.config.n;
    j["reps"] = s.config.reps;
    j["seed"] = s.config.seed;
    j["t_model"] = s.t_model_correct ? "correct" : "misspecified";
    j["c_model"] = s.c_model_correct ? "correct" : "misspecified";
    j["completed"] = s.completed;
    j["failed"] = s.failed;
    j["naive_mean"] = s.naive_mean;
    j["alpha_mean"] = s.alpha_mean;
    j["alpha_sd"] = s.alpha_sd ? json(*s.alpha_sd) : json(nullptr);
    j["median_se"] = s.median_se;
    j["coverage95"] = s.coverage95;
    j["censoring_mean"] = s.censoring_mean;
    j["histogram"] = {{"edges", s.histogram.edges}, {"counts", s.histogram.counts}};
    json reps = json::array();
    for (const auto& r : s.reps) {
      json rj = {{"index", r.index}, {"ok", r.ok}};
      if (r.ok) {
        rj["alpha"] = r.alpha;
        rj["se"] = r.se;
        rj["naive"] = r.naive;
      } else {
        rj["error"] = r.error;
      }
      reps.push_back(rj);
    }
    j["rep_results"] = reps;
    out.push_back(j);
  }
  return json{{"scenarios", out}}.dump(2);
}

void emit(const StudyReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  {
    auto out = open_out(root / "table1.csv");
    out << "beta0,working_models,naive,alpha_mean,alpha_sd,med_se,coverage\n";
    for (const auto& s : report.scenarios) {
      out << s.config.beta0 << ',' << s.working_models() << ',' << s.naive_mean << ',' << s.alpha_mean << ',';
      if (s.alpha_sd) out << *s.alpha_sd;
      out << ',' << s.median_se << ',' << s.coverage95 << '\n';
    }
  }
  for (std::size_t k = 0; k < report.scenarios.size(); ++k) {
    const auto& s = report.scenarios[k];
    auto hist = open_out(root / ("histogram_" + std::to_string(k) + ".csv"));
    hist << "bin_left,bin_right,count\n";
    for (std::size_t b = 0; b < s.histogram.counts.size(); ++b)
      hist << s.histogram.edges[b] << ',' << s.histogram.edges[b + 1] << ',' << s.histogram.counts[b] << '\n';
    auto reps = open_out(root / ("reps_" + std::to_string(k) + ".csv"));
    reps << "rep,ok,alpha,se,naive,censoring\n";
    for (const auto& r : s.reps)
      reps << r.index << ',' << (r.ok ? 1 : 0) << ',' << r.alpha << ',' << r.se << ',' << r.naive << ','
           << r.censoring << '\n';
  }
  auto js = open_out(root / "report.json");
  js << report_to_json(report) << '\n';
}

}  // namespace dcsieve
