#include "survlat/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "survlat/artifacts.hpp"
#include "survlat/numerics.hpp"

namespace survlat {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, std::size_t row, const char* what) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("row " + std::to_string(row) + ": cannot parse " +
                             what + " '" + field + "'");
  }
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

std::size_t Cohort::event_count() const {
  std::size_t k = 0;
  for (const auto& r : records)
    if (r.event) ++k;
  return k;
}

void Cohort::validate() const {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SurvivalRecord& r = records[i];
    if (r.id.empty()) throw std::runtime_error("record " + std::to_string(i) + ": empty id");
    if (!seen.insert(r.id).second) {
      throw std::runtime_error("duplicate id '" + r.id + "'");
    }
    if (!(r.time > 0.0) || !std::isfinite(r.time)) {
      throw std::runtime_error("record '" + r.id + "': time must be positive and finite");
    }
    if (r.features.size() != feature_names.size()) {
      throw std::runtime_error("record '" + r.id + "': feature length " +
                               std::to_string(r.features.size()) + " != " +
                               std::to_string(feature_names.size()));
    }
    for (double f : r.features) {
      if (!std::isfinite(f)) {
        throw std::runtime_error("record '" + r.id + "': non-finite feature");
      }
    }
  }
}

double nonlinear_log_risk(std::span<const double> features) {
  if (features.size() < 3) {
    throw std::invalid_argument("nonlinear_log_risk: needs at least 3 features");
  }
  return features[0] * features[1] + std::sin(features[2]);
}

namespace {

double log_risk_of(const SimConfig& config, std::span<const double> features) {
  if (config.log_risk_form == LogRiskForm::Nonlinear) {
    return nonlinear_log_risk(features);
  }
  return dot(config.true_coefficients, features);
}

// Weibull baseline: cumulative hazard (t/scale)^shape, so conditional on
// log-risk h the event time is scale * (-log u)^(1/shape) * exp(-h/shape).
double draw_event_time(const SimConfig& config, double h, Rng& rng) {
  const double u = 1.0 - rng.uniform();  // (0, 1]
  return config.weibull_scale * std::pow(-std::log(u), 1.0 / config.weibull_shape) *
         std::exp(-h / config.weibull_shape);
}

double calibrate_censor_rate(const SimConfig& config) {
  constexpr std::size_t kPilot = 10000;
  Rng pilot_rng(Rng::derive(config.seed, 0x70696C6F74ULL));  // "pilot"
  std::vector<double> event_times(kPilot);
  std::vector<double> censor_u(kPilot);
  std::vector<double> f(config.feature_dim);
  for (std::size_t i = 0; i < kPilot; ++i) {
    for (double& x : f) x = pilot_rng.normal();
    event_times[i] = draw_event_time(config, log_risk_of(config, f), pilot_rng);
    censor_u[i] = 1.0 - pilot_rng.uniform();
  }
  auto censored_fraction = [&](double rate) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < kPilot; ++i) {
      if (-std::log(censor_u[i]) / rate < event_times[i]) ++c;
    }
    return static_cast<double>(c) / static_cast<double>(kPilot);
  };
  double lo = 1e-12, hi = 1e12;
  if (censored_fraction(lo) > config.target_censor_fraction ||
      censored_fraction(hi) < config.target_censor_fraction) {
    throw std::runtime_error("simulate_cohort: censor calibration infeasible for target " +
                             format_double(config.target_censor_fraction));
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (censored_fraction(mid) < config.target_censor_fraction) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::sqrt(lo * hi);
}

void validate_config(const SimConfig& config) {
  if (config.feature_dim == 0) throw std::invalid_argument("simulate_cohort: feature_dim must be positive");
  if (config.log_risk_form == LogRiskForm::Linear &&
      config.true_coefficients.size() != config.feature_dim) {
    throw std::invalid_argument("simulate_cohort: true_coefficients length must equal feature_dim");
  }
  if (config.log_risk_form == LogRiskForm::Nonlinear && config.feature_dim < 3) {
    throw std::invalid_argument("simulate_cohort: nonlinear form needs feature_dim >= 3");
  }
  if (!(config.weibull_shape > 0.0) || !(config.weibull_scale > 0.0)) {
    throw std::invalid_argument("simulate_cohort: Weibull shape and scale must be positive");
  }
  if (!(config.target_censor_fraction >= 0.0) || !(config.target_censor_fraction < 1.0)) {
    throw std::invalid_argument("simulate_cohort: target_censor_fraction must be in [0, 1)");
  }
  if (!(config.min_days > 0.0) || !(config.max_days > config.min_days)) {
    throw std::invalid_argument("simulate_cohort: need 0 < min_days < max_days");
  }
}

}  // namespace

Simulation simulate_cohort(const SimConfig& config) {
  validate_config(config);

  Simulation sim;
  sim.truth.true_coefficients = config.true_coefficients;
  for (std::size_t j = 0; j < config.feature_dim; ++j) {
    sim.cohort.feature_names.push_back("f" + std::to_string(j));
  }
  if (config.n == 0) return sim;

  const double censor_rate = config.target_censor_fraction > 0.0
                                 ? calibrate_censor_rate(config)
                                 : 0.0;

  Rng rng(config.seed);
  std::size_t censored = 0;
  for (std::size_t i = 0; i < config.n; ++i) {
    SurvivalRecord r;
    char idbuf[24];
    std::snprintf(idbuf, sizeof(idbuf), "s%06zu", i);
    r.id = idbuf;
    r.features.resize(config.feature_dim);
    for (double& x : r.features) x = rng.normal();
    const double h = log_risk_of(config, r.features);
    const double t_event = draw_event_time(config, h, rng);
    double observed = t_event;
    bool event = true;
    if (censor_rate > 0.0) {
      const double t_censor = -std::log(1.0 - rng.uniform()) / censor_rate;
      if (t_censor < t_event) {
        observed = t_censor;
        event = false;
      }
    }
    r.time = std::clamp(observed, config.min_days, config.max_days);
    r.event = event;
    if (!event) ++censored;
    sim.truth.true_log_risk.push_back(h);
    sim.cohort.records.push_back(std::move(r));
  }
  sim.realized_censor_fraction =
      static_cast<double>(censored) / static_cast<double>(config.n);

  if (!config.allow_ties) {
    // Clamping piles times onto the range boundaries; separate duplicates
    // deterministically in record order.
    std::map<double, std::size_t> rank_of_time;
    for (SurvivalRecord& r : sim.cohort.records) {
      auto [it, fresh] = rank_of_time.try_emplace(r.time, 0);
      if (!fresh) r.time += 1e-6 * static_cast<double>(it->second);
      ++it->second;
    }
  }
  sim.cohort.validate();
  return sim;
}

Cohort load_cohort(const std::string& path,
                   std::optional<std::size_t> expected_feature_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cohort file: " + path);

  Cohort cohort;
  std::string line;
  std::size_t row = 0;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path + ": empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++row;
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "time" ||
      header[2] != "event") {
    throw std::runtime_error(path + ": header must start with id,time,event");
  }
  cohort.feature_names.assign(header.begin() + 3, header.end());
  if (expected_feature_dim && cohort.feature_names.size() != *expected_feature_dim) {
    throw std::runtime_error(path + ": expected " +
                             std::to_string(*expected_feature_dim) +
                             " features, file has " +
                             std::to_string(cohort.feature_names.size()));
  }

  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("row " + std::to_string(row) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(fields.size()));
    }
    SurvivalRecord r;
    r.id = fields[0];
    if (r.id.empty()) {
      throw std::runtime_error("row " + std::to_string(row) + ": missing id");
    }
    if (!seen.insert(r.id).second) {
      throw std::runtime_error("row " + std::to_string(row) + ": duplicate id '" +
                               r.id + "'");
    }
    r.time = parse_double(fields[1], row, "time");
    if (!(r.time > 0.0) || !std::isfinite(r.time)) {
      throw std::runtime_error("row " + std::to_string(row) +
                               ": time must be positive and finite");
    }
    if (fields[2] == "1") {
      r.event = true;
    } else if (fields[2] == "0") {
      r.event = false;
    } else {
      throw std::runtime_error("row " + std::to_string(row) +
                               ": event must be 0 or 1, got '" + fields[2] + "'");
    }
    for (std::size_t j = 3; j < fields.size(); ++j) {
      const double v = parse_double(fields[j], row, "feature");
      if (!std::isfinite(v)) {
        throw std::runtime_error("row " + std::to_string(row) + ": non-finite feature");
      }
      r.features.push_back(v);
    }
    cohort.records.push_back(std::move(r));
  }
  if (cohort.records.empty()) {
    throw std::runtime_error(path + ": no records");
  }
  return cohort;
}

void save_cohort(const Cohort& cohort, const std::string& path) {
  std::string out = "id,time,event";
  for (const std::string& name : cohort.feature_names) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (const SurvivalRecord& r : cohort.records) {
    out += r.id;
    out += ',';
    out += format_double(r.time);
    out += ',';
    out += r.event ? '1' : '0';
    for (double f : r.features) {
      out += ',';
      out += format_double(f);
    }
    out += '\n';
  }
  atomic_write_file(path, out);
}

void save_ground_truth(const Cohort& cohort, const GroundTruth& truth,
                       const std::string& path) {
  if (truth.true_log_risk.size() != cohort.size()) {
    throw std::invalid_argument("save_ground_truth: length mismatch");
  }
  std::string out = "id,true_log_risk\n";
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    out += cohort.records[i].id;
    out += ',';
    out += format_double(truth.true_log_risk[i]);
    out += '\n';
  }
  atomic_write_file(path, out);
}

std::vector<double> load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ground truth file: " + path);
  std::string line;
  std::getline(in, line);
  std::vector<double> risks;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 2) {
      throw std::runtime_error("row " + std::to_string(row) + ": expected 2 fields");
    }
    risks.push_back(parse_double(fields[1], row, "true_log_risk"));
  }
  return risks;
}

std::vector<double> fuse_features(std::span<const double> clinical,
                                  std::span<const double> embedding) {
  std::vector<double> fused;
  fused.reserve(clinical.size() + embedding.size());
  for (double v : clinical) {
    if (!std::isfinite(v)) throw std::invalid_argument("fuse_features: non-finite clinical value");
    fused.push_back(v);
  }
  for (double v : embedding) {
    if (!std::isfinite(v)) throw std::invalid_argument("fuse_features: non-finite embedding value");
    fused.push_back(v);
  }
  return fused;
}

std::pair<Cohort, Cohort> split_cohort(const Cohort& cohort,
                                       double train_fraction,
                                       std::uint64_t seed) {
  if (cohort.records.empty()) {
    throw std::invalid_argument("split_cohort: cohort is empty");
  }
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
    throw std::invalid_argument("split_cohort: train_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(cohort.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(cohort.size()) * train_fraction));

  Cohort train, test;
  train.feature_names = cohort.feature_names;
  test.feature_names = cohort.feature_names;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : test).records.push_back(cohort.records[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace survlat
