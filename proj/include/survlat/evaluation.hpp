#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "survlat/cohort.hpp"

namespace survlat {

// Right-continuous step function starting at S(0) = 1; `times` are the drop
// points, `values` the value on [times[i], times[i+1]).
struct StepSurvival {
  std::vector<double> times;
  std::vector<double> values;

  double value_at(double t) const;      // S(t)
  double value_before(double t) const;  // left limit S(t-)
};

// Product-limit estimator. With `for_censoring` the event indicators are
// flipped so the curve estimates the censoring distribution G(t).
StepSurvival kaplan_meier(std::span<const double> times,
                          const std::vector<bool>& events,
                          bool for_censoring = false);

// Harrell's C: comparable pairs (i, j) have t_i < t_j and event_i; risk ties
// get half credit; tied-time pairs are excluded. O(n log n), exactly equal
// to the direct pair count.
double concordance_index(std::span<const double> times,
                         const std::vector<bool>& events,
                         std::span<const double> risks);

using SurvivalPredictor =
    std::function<double(std::span<const double> features, double t)>;

// IPCW Brier score at one horizon; censor_dist must estimate G.
double brier_score(const SurvivalPredictor& predict, const Cohort& cohort,
                   double horizon, const StepSurvival& censor_dist);

struct BrierGridSpec {
  std::size_t points = 100;
  double lower_quantile = 0.05;
  double upper_quantile = 0.95;
};

// Equally spaced quantiles of the observed event times; deduplicated.
std::vector<double> brier_time_grid(const Cohort& cohort, const BrierGridSpec& spec);

struct IntegratedBrierResult {
  double value = 0.0;
  std::vector<std::pair<double, double>> curve;  // (t, BS(t))
};

// Trapezoidal integral of BS(t) over the grid, normalized by the grid span.
IntegratedBrierResult integrated_brier(const SurvivalPredictor& predict,
                                       const Cohort& cohort,
                                       const StepSurvival& censor_dist,
                                       const BrierGridSpec& spec = {});

}  // namespace survlat
