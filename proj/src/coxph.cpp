#include "survlat/coxph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "survlat/artifacts.hpp"
#include "survlat/numerics.hpp"

namespace survlat {

namespace {

// Cohort view sorted by descending time; built once per fit.
struct PreparedCohort {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> features;  // row-major, sorted order
  std::vector<double> times;
  std::vector<bool> events;
  std::size_t event_count = 0;
};

PreparedCohort prepare(const Cohort& cohort) {
  PreparedCohort p;
  p.n = cohort.size();
  p.dim = cohort.feature_dim();
  if (p.n == 0) throw std::invalid_argument("cox_nll: empty cohort");

  std::vector<std::size_t> order(p.n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cohort.records[a].time > cohort.records[b].time;
  });
  p.features.reserve(p.n * p.dim);
  for (std::size_t i : order) {
    const SurvivalRecord& r = cohort.records[i];
    if (r.features.size() != p.dim) {
      throw std::invalid_argument("cox_nll: feature length mismatch for id '" + r.id + "'");
    }
    p.features.insert(p.features.end(), r.features.begin(), r.features.end());
    p.times.push_back(r.time);
    p.events.push_back(r.event);
    if (r.event) ++p.event_count;
  }
  return p;
}

CoxNllResult nll_prepared(const PreparedCohort& p, std::span<const double> w,
                          double ridge_lambda) {
  if (w.size() != p.dim) throw std::invalid_argument("cox_nll: coefficient length mismatch");
  if (p.event_count == 0) {
    throw std::runtime_error("cox_nll: partial likelihood undefined, cohort has no events");
  }

  CoxNllResult out;
  out.gradient.assign(p.dim, 0.0);

  std::vector<double> log_risks(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    log_risks[i] = dot(w, std::span<const double>(p.features.data() + i * p.dim, p.dim));
  }

  // Sweep descending in time; the at-risk accumulators grow as subjects
  // enter. Streaming max subtraction keeps exp sums stable.
  double max_h = -std::numeric_limits<double>::infinity();
  double sum_exp = 0.0;                       // sum exp(h - max_h)
  std::vector<double> sum_exp_feat(p.dim, 0.0);  // sum exp(h - max_h) * f
  double loss = 0.0;

  std::size_t i = 0;
  while (i < p.n) {
    std::size_t group_end = i;
    while (group_end < p.n && p.times[group_end] == p.times[i]) ++group_end;

    for (std::size_t k = i; k < group_end; ++k) {
      const double h = log_risks[k];
      if (h > max_h) {
        if (std::isfinite(max_h)) {
          const double scale = std::exp(max_h - h);
          sum_exp *= scale;
          for (double& v : sum_exp_feat) v *= scale;
        }
        max_h = h;
      }
      const double e = std::exp(h - max_h);
      sum_exp += e;
      const double* f = p.features.data() + k * p.dim;
      for (std::size_t j = 0; j < p.dim; ++j) sum_exp_feat[j] += e * f[j];
    }

    std::size_t deaths = 0;
    for (std::size_t k = i; k < group_end; ++k) {
      if (!p.events[k]) continue;
      ++deaths;
      loss -= log_risks[k];
      const double* f = p.features.data() + k * p.dim;
      for (std::size_t j = 0; j < p.dim; ++j) out.gradient[j] -= f[j];
    }
    if (deaths > 0) {
      const double log_sum = max_h + std::log(sum_exp);
      loss += static_cast<double>(deaths) * log_sum;
      const double scale = static_cast<double>(deaths) / sum_exp;
      for (std::size_t j = 0; j < p.dim; ++j) {
        out.gradient[j] += scale * sum_exp_feat[j];
      }
    }
    i = group_end;
  }

  for (std::size_t j = 0; j < p.dim; ++j) {
    loss += ridge_lambda * w[j] * w[j];
    out.gradient[j] += 2.0 * ridge_lambda * w[j];
  }
  out.loss = loss;
  return out;
}

constexpr std::size_t kConvergenceWindow = 500;

}  // namespace

CoxNllResult cox_nll(std::span<const double> coefficients, const Cohort& cohort,
                     double ridge_lambda) {
  return nll_prepared(prepare(cohort), coefficients, ridge_lambda);
}

CoxModel fit_coxph(const Cohort& cohort, const CoxFitConfig& config) {
  const PreparedCohort p = prepare(cohort);
  if (p.event_count == 0) {
    throw std::runtime_error("fit_coxph: cohort has no events");
  }

  CoxModel model;
  model.ridge_lambda = config.ridge_lambda;
  model.feature_names = cohort.feature_names;
  if (config.initial_coefficients) {
    if (config.initial_coefficients->size() != p.dim) {
      throw std::invalid_argument("fit_coxph: initial coefficient length mismatch");
    }
    model.coefficients = *config.initial_coefficients;
  } else {
    model.coefficients.assign(p.dim, 0.0);
  }

  AdamState state(p.dim, kTrainingAdam);
  std::vector<double> loss_history;
  loss_history.reserve(config.max_iters + 1);

  std::size_t it = 0;
  bool converged = false;
  double loss = 0.0;
  while (it < config.max_iters) {
    CoxNllResult r = nll_prepared(p, model.coefficients, config.ridge_lambda);
    loss = r.loss;
    if (!std::isfinite(loss)) {
      throw std::runtime_error("fit_coxph: loss diverged at iteration " + std::to_string(it));
    }
    if (loss_history.size() >= kConvergenceWindow) {
      const double ref = loss_history[loss_history.size() - kConvergenceWindow];
      if (std::abs(loss - ref) / std::max(1.0, std::abs(ref)) < config.tolerance) {
        converged = true;
        break;
      }
    }
    loss_history.push_back(loss);
    adam_step(state, model.coefficients, r.gradient);
    ++it;
  }
  if (!converged) {
    // Reflect the final iterate.
    loss = nll_prepared(p, model.coefficients, config.ridge_lambda).loss;
  }
  model.diagnostics.final_loss = loss;
  model.diagnostics.iterations = it;
  model.diagnostics.converged = converged;
  model.diagnostics.message =
      converged ? "windowed relative loss change below tolerance"
                : "stopped at max_iters before reaching tolerance";
  return model;
}

double BaselineHazard::value_at(double t) const {
  auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
  if (it == event_times.begin()) return 0.0;
  return cumulative_hazard[static_cast<std::size_t>(it - event_times.begin()) - 1];
}

BaselineHazard breslow_baseline(std::span<const double> log_risks,
                                std::span<const double> times,
                                const std::vector<bool>& events) {
  const std::size_t n = times.size();
  if (log_risks.size() != n || events.size() != n) {
    throw std::invalid_argument("breslow_baseline: length mismatch");
  }
  if (std::none_of(events.begin(), events.end(), [](bool e) { return e; })) {
    throw std::runtime_error("breslow_baseline: no events");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });

  // Descending sweep with streaming max, recording increments at event times.
  double max_h = -std::numeric_limits<double>::infinity();
  double sum_exp = 0.0;
  std::vector<std::pair<double, double>> increments;  // (time, d_k / S_k)
  std::size_t i = 0;
  while (i < n) {
    std::size_t group_end = i;
    while (group_end < n && times[order[group_end]] == times[order[i]]) ++group_end;
    for (std::size_t k = i; k < group_end; ++k) {
      const double h = log_risks[order[k]];
      if (h > max_h) {
        if (std::isfinite(max_h)) sum_exp *= std::exp(max_h - h);
        max_h = h;
      }
      sum_exp += std::exp(h - max_h);
    }
    std::size_t deaths = 0;
    for (std::size_t k = i; k < group_end; ++k) {
      if (events[order[k]]) ++deaths;
    }
    if (deaths > 0) {
      increments.emplace_back(
          times[order[i]],
          static_cast<double>(deaths) * std::exp(-max_h) / sum_exp);
    }
    i = group_end;
  }

  BaselineHazard baseline;
  double cumulative = 0.0;
  for (auto rit = increments.rbegin(); rit != increments.rend(); ++rit) {
    cumulative += rit->second;
    baseline.event_times.push_back(rit->first);
    baseline.cumulative_hazard.push_back(cumulative);
  }
  return baseline;
}

BaselineHazard breslow_baseline(const CoxModel& model, const Cohort& cohort) {
  std::vector<double> log_risks, times;
  std::vector<bool> events;
  for (const SurvivalRecord& r : cohort.records) {
    log_risks.push_back(predict_risk(model, r.features));
    times.push_back(r.time);
    events.push_back(r.event);
  }
  return breslow_baseline(log_risks, times, events);
}

double predict_risk(const CoxModel& model, std::span<const double> features) {
  if (features.size() != model.coefficients.size()) {
    throw std::invalid_argument("predict_risk: feature length mismatch");
  }
  return dot(model.coefficients, features);
}

double predict_survival(const CoxModel& model, const BaselineHazard& baseline,
                        std::span<const double> features, double t) {
  if (t < 0.0) throw std::invalid_argument("predict_survival: negative time");
  const double h = predict_risk(model, features);
  return std::exp(-baseline.value_at(t) * std::exp(h));
}

void save_cox_model(const CoxModel& model, const BaselineHazard& baseline,
                    const std::string& path) {
  nlohmann::json j;
  j["model_type"] = "coxph";
  j["coefficients"] = model.coefficients;
  j["feature_names"] = model.feature_names;
  j["ridge_lambda"] = model.ridge_lambda;
  j["baseline"] = {{"event_times", baseline.event_times},
                   {"cumulative_hazard", baseline.cumulative_hazard}};
  j["diagnostics"] = {{"final_loss", model.diagnostics.final_loss},
                      {"iterations", model.diagnostics.iterations},
                      {"converged", model.diagnostics.converged},
                      {"message", model.diagnostics.message}};
  atomic_write_file(path, j.dump(2) + "\n");
}

std::pair<CoxModel, BaselineHazard> load_cox_model(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(read_file(path));
  if (j.at("model_type") != "coxph") {
    throw std::runtime_error(path + ": not a coxph model file");
  }
  CoxModel model;
  model.coefficients = j.at("coefficients").get<std::vector<double>>();
  model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  model.ridge_lambda = j.at("ridge_lambda").get<double>();
  const auto& d = j.at("diagnostics");
  model.diagnostics.final_loss = d.at("final_loss").get<double>();
  model.diagnostics.iterations = d.at("iterations").get<std::size_t>();
  model.diagnostics.converged = d.at("converged").get<bool>();
  model.diagnostics.message = d.at("message").get<std::string>();
  BaselineHazard baseline;
  baseline.event_times = j.at("baseline").at("event_times").get<std::vector<double>>();
  baseline.cumulative_hazard =
      j.at("baseline").at("cumulative_hazard").get<std::vector<double>>();
  return {std::move(model), std::move(baseline)};
}

}  // namespace survlat
