#include "survlat/deepsurv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "survlat/artifacts.hpp"
#include "survlat/evaluation.hpp"

namespace survlat {

DeepSurvLossResult deepsurv_loss(const Matrix& log_risks,
                                 std::span<const double> times,
                                 const std::vector<bool>& events) {
  const std::size_t n = times.size();
  if (log_risks.rows != n || log_risks.cols != 1 || events.size() != n) {
    throw std::invalid_argument("deepsurv_loss: shape mismatch");
  }
  if (n < 2) throw std::invalid_argument("deepsurv_loss: batch needs n >= 2");
  const std::size_t k = static_cast<std::size_t>(
      std::count(events.begin(), events.end(), true));
  if (k == 0) throw std::runtime_error("deepsurv_loss: batch has no events");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });

  std::vector<double> h(n);
  double max_h = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = log_risks(order[i], 0);
    max_h = std::max(max_h, h[i]);
  }

  // Prefix sums of exp(h - max) in descending-time order; the risk set of an
  // event is the prefix through the end of its tie group.
  std::vector<double> prefix(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::exp(h[i] - max_h);
    prefix[i] = acc;
  }

  double loss = 0.0;
  std::vector<double> tail_coef(n + 1, 0.0);  // sum over events i with group_end >= pos
  std::size_t i = 0;
  while (i < n) {
    std::size_t group_end = i;
    while (group_end < n && times[order[group_end]] == times[order[i]]) ++group_end;
    const double risk_mass = prefix[group_end - 1];
    for (std::size_t p = i; p < group_end; ++p) {
      if (!events[order[p]]) continue;
      loss -= h[p] - (max_h + std::log(risk_mass));
      tail_coef[group_end - 1] += 1.0 / risk_mass;
    }
    i = group_end;
  }
  loss /= static_cast<double>(k);

  // Suffix-accumulate the 1/S_i coefficients so position p receives the sum
  // over all events whose risk set contains it.
  for (std::size_t p = n; p-- > 0;) tail_coef[p] += tail_coef[p + 1];

  DeepSurvLossResult out;
  out.loss = loss;
  out.dlog_risk = Matrix(n, 1);
  for (std::size_t p = 0; p < n; ++p) {
    const double indicator = events[order[p]] ? 1.0 : 0.0;
    const double soft = std::exp(h[p] - max_h) * tail_coef[p];
    out.dlog_risk(order[p], 0) = -(indicator - soft) / static_cast<double>(k);
  }
  return out;
}

namespace {

Matrix rows_matrix(const Cohort& cohort, const std::vector<std::size_t>& idx) {
  Matrix m(idx.size(), cohort.feature_dim());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& f = cohort.records[idx[i]].features;
    std::copy(f.begin(), f.end(), m.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
  }
  return m;
}

double validation_c_index(MlpNetwork& net, const Cohort& cohort,
                          const std::vector<std::size_t>& idx, Rng& rng) {
  const MlpMode saved = net.mode;
  net.mode = MlpMode::Eval;
  Matrix batch = rows_matrix(cohort, idx);
  MlpForwardResult fwd = mlp_forward(net, batch, rng);
  net.mode = saved;
  std::vector<double> times, risks;
  std::vector<bool> events;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    times.push_back(cohort.records[idx[i]].time);
    events.push_back(cohort.records[idx[i]].event);
    risks.push_back(fwd.output(i, 0));
  }
  return concordance_index(times, events, risks);
}

}  // namespace

DeepSurvModel train_deepsurv(const Cohort& cohort, const TrainConfig& config) {
  cohort.validate();
  if (config.batch_size < 2) {
    throw std::invalid_argument("train_deepsurv: batch_size must be >= 2");
  }
  if (cohort.size() < 2 * config.batch_size) {
    throw std::invalid_argument("train_deepsurv: cohort smaller than 2 * batch_size");
  }

  Rng rng(config.seed);

  // Validation sub-split of the provided (training) cohort.
  std::vector<std::size_t> order(cohort.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  const auto n_val = static_cast<std::size_t>(std::llround(
      static_cast<double>(cohort.size()) * config.validation_fraction));
  if (n_val < 2) {
    throw std::invalid_argument("train_deepsurv: validation split too small");
  }
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

  DeepSurvModel model;
  model.feature_schema = cohort.feature_names;
  MlpNetwork net = make_survival_mlp(cohort.feature_dim(), config.hidden_widths,
                                     config.dropout, rng);

  std::vector<double> params = mlp_parameters(net);
  AdamState adam(params.size(),
                 AdamHyper{config.learning_rate, 0.9, 0.999, 1e-8});

  model.initial_validation_c_index = validation_c_index(net, cohort, val_idx, rng);
  double best_c = model.initial_validation_c_index;
  MlpNetwork best_net = net;
  std::size_t best_epoch = 0;
  std::size_t epochs_since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle(train_idx, rng);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    std::vector<std::size_t> pending;
    std::size_t cursor = 0;
    while (cursor < train_idx.size()) {
      const std::size_t take =
          std::min(config.batch_size, train_idx.size() - cursor);
      pending.insert(pending.end(), train_idx.begin() + cursor,
                     train_idx.begin() + cursor + take);
      cursor += take;
      const bool has_event = std::any_of(
          pending.begin(), pending.end(),
          [&](std::size_t i) { return cohort.records[i].event; });
      const bool last = cursor >= train_idx.size();
      if ((!has_event || pending.size() < 2) && !last) {
        continue;  // merge forward into the next batch
      }
      if (!has_event || pending.size() < 2) {
        pending.clear();  // trailing event-less remainder is dropped this epoch
        break;
      }

      Matrix batch = rows_matrix(cohort, pending);
      std::vector<double> times;
      std::vector<bool> events;
      for (std::size_t i : pending) {
        times.push_back(cohort.records[i].time);
        events.push_back(cohort.records[i].event);
      }
      net.mode = MlpMode::Train;
      MlpForwardResult fwd = mlp_forward(net, batch, rng);
      DeepSurvLossResult loss = deepsurv_loss(fwd.output, times, events);
      if (!std::isfinite(loss.loss)) {
        throw std::runtime_error("train_deepsurv: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batches));
      }
      MlpGradients grads = mlp_backward(net, fwd.cache, loss.dlog_risk);
      params = mlp_parameters(net);
      adam_step(adam, params, flatten_gradients(grads));
      set_mlp_parameters(net, params);
      epoch_loss += loss.loss;
      ++batches;
      pending.clear();
    }

    EpochStats stats;
    stats.train_loss = batches > 0 ? epoch_loss / static_cast<double>(batches) : 0.0;
    stats.validation_c_index = validation_c_index(net, cohort, val_idx, rng);
    model.history.push_back(stats);

    if (stats.validation_c_index > best_c) {
      best_c = stats.validation_c_index;
      best_net = net;
      best_epoch = epoch;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.patience) break;
    }
  }

  best_net.mode = MlpMode::Eval;
  model.network = std::move(best_net);
  model.best_epoch = best_epoch;
  return model;
}

double predict_log_risk(const DeepSurvModel& model, std::span<const double> features) {
  if (features.size() != model.network.input_dim()) {
    throw std::invalid_argument("predict_log_risk: feature length mismatch");
  }
  Matrix batch(1, features.size());
  std::copy(features.begin(), features.end(), batch.data.begin());
  MlpNetwork net = model.network;  // eval forward leaves state untouched
  net.mode = MlpMode::Eval;
  Rng rng(0);
  return mlp_forward(net, batch, rng).output(0, 0);
}

std::vector<double> predict_log_risks(const DeepSurvModel& model, const Cohort& cohort) {
  std::vector<std::size_t> idx(cohort.size());
  std::iota(idx.begin(), idx.end(), 0);
  Matrix batch = rows_matrix(cohort, idx);
  MlpNetwork net = model.network;
  net.mode = MlpMode::Eval;
  Rng rng(0);
  MlpForwardResult fwd = mlp_forward(net, batch, rng);
  std::vector<double> out(cohort.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd.output(i, 0);
  return out;
}

namespace {

nlohmann::json layer_to_json(const MlpLayer& layer) {
  nlohmann::json j;
  j["input_dim"] = layer.weights.rows;
  j["output_dim"] = layer.weights.cols;
  j["weights"] = layer.weights.data;
  j["bias"] = layer.bias;
  j["activation"] = layer.activation == Activation::Relu ? "relu" : "linear";
  j["dropout"] = layer.dropout;
  if (layer.batch_norm) {
    j["batch_norm"] = {{"scale", layer.batch_norm->scale},
                       {"shift", layer.batch_norm->shift},
                       {"running_mean", layer.batch_norm->running_mean},
                       {"running_var", layer.batch_norm->running_var}};
  }
  return j;
}

MlpLayer layer_from_json(const nlohmann::json& j) {
  MlpLayer layer;
  layer.weights = Matrix(j.at("input_dim").get<std::size_t>(),
                         j.at("output_dim").get<std::size_t>());
  layer.weights.data = j.at("weights").get<std::vector<double>>();
  if (layer.weights.data.size() != layer.weights.rows * layer.weights.cols) {
    throw std::runtime_error("deepsurv model: weight size mismatch");
  }
  layer.bias = j.at("bias").get<std::vector<double>>();
  layer.activation =
      j.at("activation") == "relu" ? Activation::Relu : Activation::Linear;
  layer.dropout = j.at("dropout").get<bool>();
  if (j.contains("batch_norm")) {
    BatchNorm bn;
    const auto& b = j.at("batch_norm");
    bn.scale = b.at("scale").get<std::vector<double>>();
    bn.shift = b.at("shift").get<std::vector<double>>();
    bn.running_mean = b.at("running_mean").get<std::vector<double>>();
    bn.running_var = b.at("running_var").get<std::vector<double>>();
    layer.batch_norm = std::move(bn);
  }
  return layer;
}

}  // namespace

void save_deepsurv_model(const DeepSurvModel& model, const std::string& path) {
  nlohmann::json j;
  j["model_type"] = "deepsurv";
  j["feature_schema"] = model.feature_schema;
  j["dropout_rate"] = model.network.dropout_rate;
  nlohmann::json layers = nlohmann::json::array();
  for (const MlpLayer& layer : model.network.layers) layers.push_back(layer_to_json(layer));
  j["layers"] = layers;
  nlohmann::json hist = nlohmann::json::array();
  for (const EpochStats& s : model.history) {
    hist.push_back({{"train_loss", s.train_loss},
                    {"validation_c_index", s.validation_c_index}});
  }
  j["diagnostics"] = {
      {"initial_validation_c_index", model.initial_validation_c_index},
      {"best_epoch", model.best_epoch},
      {"history", hist}};
  atomic_write_file(path, j.dump(2) + "\n");
}

DeepSurvModel load_deepsurv_model(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(read_file(path));
  if (j.at("model_type") != "deepsurv") {
    throw std::runtime_error(path + ": not a deepsurv model file");
  }
  DeepSurvModel model;
  model.feature_schema = j.at("feature_schema").get<std::vector<std::string>>();
  model.network.dropout_rate = j.at("dropout_rate").get<double>();
  model.network.mode = MlpMode::Eval;
  for (const auto& lj : j.at("layers")) {
    model.network.layers.push_back(layer_from_json(lj));
  }
  const auto& d = j.at("diagnostics");
  model.initial_validation_c_index = d.at("initial_validation_c_index").get<double>();
  model.best_epoch = d.at("best_epoch").get<std::size_t>();
  for (const auto& hj : d.at("history")) {
    model.history.push_back({hj.at("train_loss").get<double>(),
                             hj.at("validation_c_index").get<double>()});
  }
  return model;
}

}  // namespace survlat
