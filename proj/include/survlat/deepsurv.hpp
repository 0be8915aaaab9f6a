#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survlat/cohort.hpp"
#include "survlat/mlp.hpp"

namespace survlat {

struct TrainConfig {
  std::size_t batch_size = 128;
  double learning_rate = 0.001;
  double dropout = 0.4;
  std::size_t max_epochs = 200;
  double validation_fraction = 0.1;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden_widths = {256, 128, 64, 32, 16};
};

struct EpochStats {
  double train_loss = 0.0;
  double validation_c_index = 0.0;
};

struct DeepSurvModel {
  MlpNetwork network;  // eval mode, best-validation-epoch weights
  std::vector<std::string> feature_schema;
  double initial_validation_c_index = 0.0;  // untrained network
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;  // 0 = untrained
};

struct DeepSurvLossResult {
  double loss = 0.0;
  Matrix dlog_risk;  // n x 1, original row order
};

// Within-batch Cox negative log partial likelihood, normalized by the batch
// event count, with exact gradient w.r.t. each log-risk.
DeepSurvLossResult deepsurv_loss(const Matrix& log_risks,
                                 std::span<const double> times,
                                 const std::vector<bool>& events);

// Mini-batch training with per-epoch shuffling, event-less batches merged
// into the next batch, Adam updates, and early stopping on validation
// C-index. Deterministic given the seed.
DeepSurvModel train_deepsurv(const Cohort& cohort, const TrainConfig& config);

double predict_log_risk(const DeepSurvModel& model, std::span<const double> features);
std::vector<double> predict_log_risks(const DeepSurvModel& model, const Cohort& cohort);

void save_deepsurv_model(const DeepSurvModel& model, const std::string& path);
DeepSurvModel load_deepsurv_model(const std::string& path);

}  // namespace survlat
