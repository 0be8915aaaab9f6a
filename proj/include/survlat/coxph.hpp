#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "survlat/cohort.hpp"

namespace survlat {

struct FitDiagnostics {
  double final_loss = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::string message;
};

struct CoxModel {
  std::vector<double> coefficients;
  double ridge_lambda = 1e-4;
  std::vector<std::string> feature_names;
  FitDiagnostics diagnostics;
};

// Breslow cumulative baseline hazard: step function increasing at each
// distinct event time, zero before the first.
struct BaselineHazard {
  std::vector<double> event_times;
  std::vector<double> cumulative_hazard;

  double value_at(double t) const;
};

struct CoxNllResult {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Negative log partial likelihood (Breslow ties) plus ridge penalty, with
// its exact gradient. Log-sum-exp runs with a streaming max subtraction.
CoxNllResult cox_nll(std::span<const double> coefficients, const Cohort& cohort,
                     double ridge_lambda = 0.0);

struct CoxFitConfig {
  double ridge_lambda = 1e-4;
  std::size_t max_iters = 20000;
  double tolerance = 1e-9;
  std::optional<std::vector<double>> initial_coefficients;
};

// Full-batch Adam (lr 0.001). Convergence: relative loss change over a
// trailing 500-iteration window below tolerance.
CoxModel fit_coxph(const Cohort& cohort, const CoxFitConfig& config = {});

// Core Breslow estimator over arbitrary log-risks (also used for network
// models).
BaselineHazard breslow_baseline(std::span<const double> log_risks,
                                std::span<const double> times,
                                const std::vector<bool>& events);
BaselineHazard breslow_baseline(const CoxModel& model, const Cohort& cohort);

double predict_risk(const CoxModel& model, std::span<const double> features);

// S(t | f) = exp(-Lambda0(t) * exp(h(f))).
double predict_survival(const CoxModel& model, const BaselineHazard& baseline,
                        std::span<const double> features, double t);

void save_cox_model(const CoxModel& model, const BaselineHazard& baseline,
                    const std::string& path);
std::pair<CoxModel, BaselineHazard> load_cox_model(const std::string& path);

}  // namespace survlat
