#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace survlat {

struct SurvivalRecord {
  std::string id;
  double time = 0.0;  // days, > 0
  bool event = false; // true = death observed, false = right-censored
  std::vector<double> features;
};

struct Cohort {
  std::vector<SurvivalRecord> records;
  std::vector<std::string> feature_names;

  std::size_t size() const { return records.size(); }
  std::size_t feature_dim() const { return feature_names.size(); }
  std::size_t event_count() const;

  // Throws on any invariant violation: duplicate ids, non-positive or
  // non-finite times, feature length mismatches.
  void validate() const;
};

enum class LogRiskForm { Linear, Nonlinear };

struct SimConfig {
  std::size_t n = 1000;
  std::size_t feature_dim = 10;
  std::vector<double> true_coefficients;  // length feature_dim for Linear
  LogRiskForm log_risk_form = LogRiskForm::Linear;
  double weibull_shape = 1.5;
  double weibull_scale = 1000.0;
  double target_censor_fraction = 0.533;  // paper cohort: 53.3% right censored
  double min_days = 2.0;
  double max_days = 4923.0;
  std::uint64_t seed = 0;
  bool allow_ties = false;
};

struct GroundTruth {
  std::vector<double> true_log_risk;      // one per record
  std::vector<double> true_coefficients;
};

struct Simulation {
  Cohort cohort;
  GroundTruth truth;
  double realized_censor_fraction = 0.0;
};

// The fixed nonlinear log-risk used by the model-separation experiments:
// h*(f) = f0 * f1 + sin(f2). Not configurable.
double nonlinear_log_risk(std::span<const double> features);

// Proportional-hazards simulation with Weibull baseline and exponential
// censoring calibrated by bisection on a 10,000-sample pilot.
Simulation simulate_cohort(const SimConfig& config);

// CSV header `id,time,event,<feature names...>`; event encoded 0/1.
Cohort load_cohort(const std::string& path,
                   std::optional<std::size_t> expected_feature_dim = std::nullopt);
void save_cohort(const Cohort& cohort, const std::string& path);

// Sibling CSV `id,true_log_risk`.
void save_ground_truth(const Cohort& cohort, const GroundTruth& truth,
                       const std::string& path);
std::vector<double> load_ground_truth(const std::string& path);

// Early fusion: clinical block first, then embedding.
std::vector<double> fuse_features(std::span<const double> clinical,
                                  std::span<const double> embedding);

// Disjoint partition by uniform shuffle; train size = round(n * fraction).
std::pair<Cohort, Cohort> split_cohort(const Cohort& cohort,
                                       double train_fraction,
                                       std::uint64_t seed);

}  // namespace survlat
