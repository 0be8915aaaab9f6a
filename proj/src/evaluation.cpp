#include "survlat/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace survlat {

double StepSurvival::value_at(double t) const {
  // Last drop point <= t.
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double StepSurvival::value_before(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

StepSurvival kaplan_meier(std::span<const double> times,
                          const std::vector<bool>& events,
                          bool for_censoring) {
  const std::size_t n = times.size();
  if (n == 0) throw std::invalid_argument("kaplan_meier: empty input");
  if (events.size() != n) throw std::invalid_argument("kaplan_meier: length mismatch");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  StepSurvival curve;
  double s = 1.0;
  std::size_t at_risk = n;
  std::size_t i = 0;
  while (i < n) {
    const double t = times[order[i]];
    std::size_t deaths = 0, leaving = 0;
    while (i < n && times[order[i]] == t) {
      const bool died = for_censoring ? !events[order[i]] : events[order[i]];
      if (died) ++deaths;
      ++leaving;
      ++i;
    }
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      curve.times.push_back(t);
      curve.values.push_back(s);
    }
    at_risk -= leaving;
  }
  return curve;
}

double concordance_index(std::span<const double> times,
                         const std::vector<bool>& events,
                         std::span<const double> risks) {
  const std::size_t n = times.size();
  if (events.size() != n || risks.size() != n) {
    throw std::invalid_argument("concordance_index: length mismatch");
  }

  // Rank-compress risks.
  std::vector<double> sorted_risks(risks.begin(), risks.end());
  std::sort(sorted_risks.begin(), sorted_risks.end());
  sorted_risks.erase(std::unique(sorted_risks.begin(), sorted_risks.end()),
                     sorted_risks.end());
  const std::size_t m = sorted_risks.size();
  auto rank_of = [&](double r) {
    return static_cast<std::size_t>(
        std::lower_bound(sorted_risks.begin(), sorted_risks.end(), r) -
        sorted_risks.begin());
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  // Sweep times ascending: each subject j is compared against all events with
  // strictly earlier time (already inserted); ties in time are excluded by
  // inserting a whole tie group only after scoring it.
  std::vector<std::uint64_t> below(m + 1, 0);  // Fenwick over event risks
  std::vector<std::uint64_t> at(m, 0);         // exact tie counts per rank
  std::uint64_t inserted = 0;
  auto fen_add = [&](std::size_t rank) {
    for (std::size_t i = rank + 1; i <= m; i += i & (~i + 1)) below[i] += 1;
  };
  auto fen_prefix = [&](std::size_t rank_inclusive) {  // count ranks <= rank_inclusive
    std::uint64_t s = 0;
    for (std::size_t i = rank_inclusive + 1; i > 0; i -= i & (~i + 1)) s += below[i];
    return s;
  };

  std::uint64_t concordant = 0, risk_ties = 0, comparable = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t group_end = i;
    while (group_end < n && times[order[group_end]] == times[order[i]]) ++group_end;
    for (std::size_t k = i; k < group_end; ++k) {
      const std::size_t j = order[k];
      const std::size_t rj = rank_of(risks[j]);
      // Events inserted so far all have t_i < t_j: every one is comparable.
      comparable += inserted;
      const std::uint64_t ties_here = at[rj];
      const std::uint64_t less_or_equal = fen_prefix(rj);
      // Concordant means the earlier-event subject has the higher risk.
      concordant += inserted - less_or_equal;
      risk_ties += ties_here;
    }
    for (std::size_t k = i; k < group_end; ++k) {
      const std::size_t j = order[k];
      if (events[j]) {
        fen_add(rank_of(risks[j]));
        at[rank_of(risks[j])] += 1;
        ++inserted;
      }
    }
    i = group_end;
  }
  if (comparable == 0) {
    throw std::runtime_error("concordance_index: no comparable pairs");
  }
  return (static_cast<double>(concordant) + 0.5 * static_cast<double>(risk_ties)) /
         static_cast<double>(comparable);
}

double brier_score(const SurvivalPredictor& predict, const Cohort& cohort,
                   double horizon, const StepSurvival& censor_dist) {
  const std::size_t n = cohort.size();
  if (n == 0) throw std::invalid_argument("brier_score: empty cohort");
  char hbuf[40];
  std::snprintf(hbuf, sizeof(hbuf), "%g", horizon);

  const double g_at_horizon = censor_dist.value_at(horizon);
  double sum = 0.0;
  for (const SurvivalRecord& r : cohort.records) {
    const double s_hat = predict(r.features, horizon);
    if (r.time <= horizon && r.event) {
      const double g = censor_dist.value_before(r.time);
      if (g <= 0.0) {
        throw std::runtime_error(std::string("brier_score: zero censoring weight at horizon ") + hbuf);
      }
      sum += s_hat * s_hat / g;
    } else if (r.time > horizon) {
      if (g_at_horizon <= 0.0) {
        throw std::runtime_error(std::string("brier_score: zero censoring weight at horizon ") + hbuf);
      }
      sum += (1.0 - s_hat) * (1.0 - s_hat) / g_at_horizon;
    }
  }
  return sum / static_cast<double>(n);
}

std::vector<double> brier_time_grid(const Cohort& cohort, const BrierGridSpec& spec) {
  std::vector<double> event_times;
  for (const SurvivalRecord& r : cohort.records) {
    if (r.event) event_times.push_back(r.time);
  }
  if (event_times.size() < 2) {
    throw std::runtime_error("brier_time_grid: need at least two event times");
  }
  std::sort(event_times.begin(), event_times.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(event_times.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, event_times.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return event_times[lo] * (1.0 - frac) + event_times[hi] * frac;
  };
  std::vector<double> grid;
  if (spec.points < 2) throw std::invalid_argument("brier_time_grid: need >= 2 points");
  for (std::size_t i = 0; i < spec.points; ++i) {
    const double q = spec.lower_quantile +
                     (spec.upper_quantile - spec.lower_quantile) *
                         static_cast<double>(i) / static_cast<double>(spec.points - 1);
    grid.push_back(quantile(q));
  }
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.size() < 2) {
    throw std::runtime_error("brier_time_grid: degenerate grid");
  }
  return grid;
}

IntegratedBrierResult integrated_brier(const SurvivalPredictor& predict,
                                       const Cohort& cohort,
                                       const StepSurvival& censor_dist,
                                       const BrierGridSpec& spec) {
  const std::vector<double> grid = brier_time_grid(cohort, spec);
  IntegratedBrierResult result;
  for (double t : grid) {
    result.curve.emplace_back(t, brier_score(predict, cohort, t, censor_dist));
  }
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < result.curve.size(); ++i) {
    const auto& [t0, b0] = result.curve[i];
    const auto& [t1, b1] = result.curve[i + 1];
    integral += 0.5 * (b0 + b1) * (t1 - t0);
  }
  result.value = integral / (grid.back() - grid.front());
  return result;
}

}  // namespace survlat
