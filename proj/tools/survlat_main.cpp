// Command-line surface for the survival-on-latent-embeddings pipeline:
// simulate -> project -> fit -> evaluate -> attribute -> manipulate/sweep.
// Every command takes --seed and writes a JSON run manifest with content
// digests of its outputs. Exit codes: 0 ok, 1 runtime error, 2 usage error.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "survlat/artifacts.hpp"
#include "survlat/cohort.hpp"
#include "survlat/coxph.hpp"
#include "survlat/deepsurv.hpp"
#include "survlat/evaluation.hpp"
#include "survlat/latent.hpp"
#include "survlat/mlp.hpp"
#include "survlat/numerics.hpp"

using namespace survlat;

namespace {

std::string format_beta(double beta) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", beta);
  return buf;
}

std::vector<double> parse_number_list(const std::string& text, const char* what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::runtime_error(std::string("cannot parse ") + what + " value '" + item + "'");
    }
  }
  if (values.empty()) throw std::runtime_error(std::string(what) + " list is empty");
  return values;
}

struct ManifestBuilder {
  RunManifest manifest;
  std::string path;

  ManifestBuilder(std::string command, std::uint64_t seed, std::string manifest_path)
      : path(std::move(manifest_path)) {
    manifest.command = std::move(command);
    manifest.seed = seed;
  }
  void input(const std::string& flag, const std::string& value) {
    manifest.inputs.emplace_back(flag, value);
  }
  void input(const std::string& flag, double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    manifest.inputs.emplace_back(flag, buf);
  }
  void input(const std::string& flag, std::size_t value) {
    manifest.inputs.emplace_back(flag, std::to_string(value));
  }
  void finish() { manifest.write(path); }
};

std::unique_ptr<Generator> make_generator(const std::string& kind,
                                          std::size_t latent_dim,
                                          std::size_t output_dim,
                                          std::uint64_t gen_seed) {
  if (kind == "identity") {
    if (output_dim != latent_dim) {
      throw std::runtime_error("identity generator requires output-dim == latent-dim");
    }
    return std::make_unique<IdentityGenerator>(latent_dim);
  }
  if (kind == "toy-linear") {
    return std::make_unique<LinearGenerator>(output_dim, latent_dim, gen_seed);
  }
  if (kind == "toy-linear-ortho") {
    if (output_dim != latent_dim) {
      throw std::runtime_error("orthonormal generator requires output-dim == latent-dim");
    }
    return std::make_unique<LinearGenerator>(LinearGenerator::orthonormal(latent_dim, gen_seed));
  }
  if (kind == "toy-mlp") {
    return std::make_unique<MlpGenerator>(latent_dim, output_dim, gen_seed);
  }
  throw std::runtime_error("unknown generator '" + kind + "'");
}

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& kind,
                                                 std::size_t input_dim,
                                                 std::uint64_t seed) {
  if (kind == "identity") return std::make_unique<IdentityExtractor>(input_dim);
  if (kind == "toy-linear") {
    return std::make_unique<LinearExtractor>(std::max<std::size_t>(input_dim / 2, 1),
                                             input_dim, seed);
  }
  throw std::runtime_error("unknown extractor '" + kind + "'");
}

Cohort cohort_from_latents(const std::vector<std::pair<std::string, LatentVector>>& latents,
                           const Cohort& survival) {
  std::map<std::string, const SurvivalRecord*> by_id;
  for (const auto& r : survival.records) by_id[r.id] = &r;
  Cohort out;
  const std::size_t dim = latents.empty() ? 0 : latents.front().second.size();
  for (std::size_t j = 0; j < dim; ++j) out.feature_names.push_back("z" + std::to_string(j));
  for (const auto& [id, z] : latents) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw std::runtime_error("latent id '" + id + "' not present in the survival cohort");
    }
    out.records.push_back({id, it->second->time, it->second->event, z});
  }
  out.validate();
  return out;
}

// Survival predictor backed by either model family; DeepSurv baselines are
// estimated from the model's log-risks on the baseline cohort.
struct LoadedModel {
  std::string type;
  CoxModel cox;
  BaselineHazard baseline;
  DeepSurvModel deep;
};

LoadedModel load_any_model(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(read_file(path));
  LoadedModel m;
  m.type = j.at("model_type").get<std::string>();
  if (m.type == "coxph") {
    auto [model, baseline] = load_cox_model(path);
    m.cox = std::move(model);
    m.baseline = std::move(baseline);
  } else if (m.type == "deepsurv") {
    m.deep = load_deepsurv_model(path);
  } else {
    throw std::runtime_error(path + ": unknown model_type '" + m.type + "'");
  }
  return m;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"survival analysis on latent embeddings"};
  app.require_subcommand(1);

  // ---- simulate ----
  auto* sim_cmd = app.add_subcommand("simulate", "simulate a synthetic survival cohort");
  SimConfig sim_config;
  std::string sim_out, sim_truth, sim_manifest, sim_coef, sim_form = "linear";
  sim_cmd->add_option("--n", sim_config.n, "number of records")->required();
  sim_cmd->add_option("--dim", sim_config.feature_dim, "feature dimension");
  sim_cmd->add_option("--coef", sim_coef, "comma-separated true coefficients");
  sim_cmd->add_option("--risk-form", sim_form, "linear | nonlinear");
  sim_cmd->add_option("--censor-frac", sim_config.target_censor_fraction,
                      "target right-censored fraction");
  sim_cmd->add_option("--weibull-shape", sim_config.weibull_shape, "baseline shape");
  sim_cmd->add_option("--weibull-scale", sim_config.weibull_scale, "baseline scale");
  sim_cmd->add_option("--tmin", sim_config.min_days, "minimum observed days");
  sim_cmd->add_option("--tmax", sim_config.max_days, "maximum observed days");
  sim_cmd->add_flag("--allow-ties", sim_config.allow_ties, "keep tied times");
  sim_cmd->add_option("--seed", sim_config.seed, "rng seed");
  sim_cmd->add_option("--out", sim_out, "output cohort csv")->required();
  sim_cmd->add_option("--truth", sim_truth, "ground-truth csv (default <out>.truth.csv)");
  sim_cmd->add_option("--manifest", sim_manifest, "manifest path (default <out>.manifest.json)");

  // ---- split ----
  auto* split_cmd = app.add_subcommand("split", "split a cohort into train and test");
  std::string split_in, split_train, split_test, split_manifest;
  double split_fraction = 0.8;
  std::uint64_t split_seed = 0;
  split_cmd->add_option("--cohort", split_in, "input cohort csv")->required();
  split_cmd->add_option("--fraction", split_fraction, "train fraction in (0,1)");
  split_cmd->add_option("--seed", split_seed, "rng seed");
  split_cmd->add_option("--out-train", split_train, "train csv")->required();
  split_cmd->add_option("--out-test", split_test, "test csv")->required();
  split_cmd->add_option("--manifest", split_manifest, "manifest path");

  // ---- project ----
  auto* project_cmd = app.add_subcommand("project", "embed observations by latent optimization");
  std::string proj_obs, proj_cohort, proj_out, proj_manifest, proj_init;
  std::string proj_generator = "identity", proj_extractor = "identity";
  std::size_t proj_latent_dim = 512, proj_output_dim = 0, proj_steps = 800;
  std::uint64_t proj_seed = 0, proj_gen_seed = 7;
  double proj_lr = 0.01;
  project_cmd->add_option("--observations", proj_obs, "observations jsonl ({id, x})");
  project_cmd->add_option("--cohort", proj_cohort, "cohort csv whose features are the observations");
  project_cmd->add_option("--generator", proj_generator,
                          "identity | toy-linear | toy-linear-ortho | toy-mlp");
  project_cmd->add_option("--extractor", proj_extractor, "identity | toy-linear");
  project_cmd->add_option("--latent-dim", proj_latent_dim, "latent dimension");
  project_cmd->add_option("--output-dim", proj_output_dim,
                          "generator output dimension (default latent-dim)");
  project_cmd->add_option("--steps", proj_steps, "gradient descent steps");
  project_cmd->add_option("--lr", proj_lr, "Adam learning rate");
  project_cmd->add_option("--gen-seed", proj_gen_seed, "generator weight seed");
  project_cmd->add_option("--init-latent", proj_init, "json file with an explicit init vector");
  project_cmd->add_option("--seed", proj_seed, "rng seed (recorded)");
  project_cmd->add_option("--out", proj_out, "latents jsonl")->required();
  project_cmd->add_option("--manifest", proj_manifest, "manifest path");

  // ---- fit-cox ----
  auto* fitcox_cmd = app.add_subcommand("fit-cox", "fit a Cox proportional-hazards model");
  std::string fitcox_in, fitcox_out, fitcox_manifest;
  CoxFitConfig cox_config;
  std::uint64_t fitcox_seed = 0;
  fitcox_cmd->add_option("--cohort", fitcox_in, "training cohort csv")->required();
  fitcox_cmd->add_option("--ridge", cox_config.ridge_lambda, "ridge strength");
  fitcox_cmd->add_option("--max-iters", cox_config.max_iters, "optimizer iteration cap");
  fitcox_cmd->add_option("--tol", cox_config.tolerance, "windowed relative loss tolerance");
  fitcox_cmd->add_option("--seed", fitcox_seed, "rng seed (recorded)");
  fitcox_cmd->add_option("--out", fitcox_out, "model json")->required();
  fitcox_cmd->add_option("--manifest", fitcox_manifest, "manifest path");

  // ---- fit-deepsurv ----
  auto* fitds_cmd = app.add_subcommand("fit-deepsurv", "train a deep survival network");
  std::string fitds_in, fitds_out, fitds_manifest, fitds_widths;
  TrainConfig train_config;
  fitds_cmd->add_option("--cohort", fitds_in, "training cohort csv")->required();
  fitds_cmd->add_option("--batch-size", train_config.batch_size, "mini-batch size");
  fitds_cmd->add_option("--lr", train_config.learning_rate, "Adam learning rate");
  fitds_cmd->add_option("--dropout", train_config.dropout, "dropout rate");
  fitds_cmd->add_option("--epochs", train_config.max_epochs, "epoch cap");
  fitds_cmd->add_option("--val-frac", train_config.validation_fraction,
                        "validation sub-split fraction");
  fitds_cmd->add_option("--patience", train_config.patience, "early-stopping patience");
  fitds_cmd->add_option("--hidden", fitds_widths, "comma-separated hidden widths");
  fitds_cmd->add_option("--seed", train_config.seed, "rng seed");
  fitds_cmd->add_option("--out", fitds_out, "model json")->required();
  fitds_cmd->add_option("--manifest", fitds_manifest, "manifest path");

  // ---- evaluate ----
  auto* eval_cmd = app.add_subcommand("evaluate", "C-index and IPCW Brier metrics");
  std::string eval_model, eval_cohort_path, eval_out, eval_manifest, eval_baseline_cohort;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--model", eval_model, "model json (coxph or deepsurv)")->required();
  eval_cmd->add_option("--cohort", eval_cohort_path, "evaluation cohort csv")->required();
  eval_cmd->add_option("--baseline-cohort", eval_baseline_cohort,
                       "cohort for the Breslow baseline (default: evaluation cohort "
                       "for deepsurv, persisted baseline for coxph)");
  eval_cmd->add_option("--seed", eval_seed, "rng seed (recorded)");
  eval_cmd->add_option("--out", eval_out, "metrics json")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "manifest path");

  // ---- attribute ----
  auto* attr_cmd = app.add_subcommand("attribute", "extract a latent direction");
  auto* health_cmd = attr_cmd->add_subcommand("health", "CoxPH coefficients on latents");
  std::string health_latents, health_survival, health_out, health_manifest;
  double health_ridge = 1e-4;
  std::uint64_t health_seed = 0;
  health_cmd->add_option("--latents", health_latents, "latents jsonl")->required();
  health_cmd->add_option("--survival", health_survival, "survival cohort csv")->required();
  health_cmd->add_option("--ridge", health_ridge, "ridge strength");
  health_cmd->add_option("--seed", health_seed, "rng seed (recorded)");
  health_cmd->add_option("--out", health_out, "attribute json")->required();
  health_cmd->add_option("--manifest", health_manifest, "manifest path");

  auto* age_cmd = attr_cmd->add_subcommand("age", "linear regression onto ages");
  std::string age_latents, age_file, age_out, age_manifest;
  double age_ridge = 1e-3;
  std::uint64_t age_seed = 0;
  age_cmd->add_option("--latents", age_latents, "latents jsonl")->required();
  age_cmd->add_option("--ages", age_file, "csv with id,age rows")->required();
  age_cmd->add_option("--ridge", age_ridge, "ridge strength");
  age_cmd->add_option("--seed", age_seed, "rng seed (recorded)");
  age_cmd->add_option("--out", age_out, "attribute json")->required();
  age_cmd->add_option("--manifest", age_manifest, "manifest path");

  auto* single_cmd = attr_cmd->add_subcommand("single-dim", "unit basis control direction");
  std::size_t single_dim_index = 132, single_latent_dim = 512;
  std::string single_out, single_manifest;
  std::uint64_t single_seed = 0;
  single_cmd->add_option("--dim", single_dim_index, "dimension index")->required();
  single_cmd->add_option("--latent-dim", single_latent_dim, "latent dimension");
  single_cmd->add_option("--seed", single_seed, "rng seed (recorded)");
  single_cmd->add_option("--out", single_out, "attribute json")->required();
  single_cmd->add_option("--manifest", single_manifest, "manifest path");

  // ---- manipulate ----
  auto* manip_cmd = app.add_subcommand("manipulate", "shift latents along an attribute");
  std::string manip_latents, manip_attr, manip_out, manip_manifest, manip_id;
  double manip_beta = 0.0;
  std::uint64_t manip_seed = 0;
  manip_cmd->add_option("--latents", manip_latents, "latents jsonl")->required();
  manip_cmd->add_option("--attribute", manip_attr, "attribute json")->required();
  manip_cmd->add_option("--beta", manip_beta, "manipulation multiplier")->required();
  manip_cmd->add_option("--id", manip_id, "only manipulate this record");
  manip_cmd->add_option("--seed", manip_seed, "rng seed (recorded)");
  manip_cmd->add_option("--out", manip_out, "manipulated latents jsonl")->required();
  manip_cmd->add_option("--manifest", manip_manifest, "manifest path");

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "render generator outputs across betas");
  std::string sweep_latents, sweep_attr, sweep_betas = "-10,-5,0,5,10,20";
  std::string sweep_generator = "toy-mlp", sweep_outdir, sweep_manifest, sweep_id;
  std::size_t sweep_output_dim = 0;
  std::uint64_t sweep_seed = 0, sweep_gen_seed = 7;
  sweep_cmd->add_option("--latent", sweep_latents, "latents jsonl")->required();
  sweep_cmd->add_option("--attribute", sweep_attr, "attribute json")->required();
  sweep_cmd->add_option("--betas", sweep_betas, "comma-separated beta values");
  sweep_cmd->add_option("--generator", sweep_generator,
                        "identity | toy-linear | toy-linear-ortho | toy-mlp");
  sweep_cmd->add_option("--output-dim", sweep_output_dim,
                        "generator output dimension (default 64 for toy maps)");
  sweep_cmd->add_option("--gen-seed", sweep_gen_seed, "generator weight seed");
  sweep_cmd->add_option("--id", sweep_id, "only sweep this record");
  sweep_cmd->add_option("--seed", sweep_seed, "rng seed (recorded)");
  sweep_cmd->add_option("--out-dir", sweep_outdir, "output directory")->required();
  sweep_cmd->add_option("--manifest", sweep_manifest, "manifest path");

  // ---- fuse ----
  auto* fuse_cmd = app.add_subcommand("fuse", "early-fuse clinical features with latents");
  std::string fuse_cohort_path, fuse_latents, fuse_out, fuse_manifest;
  std::uint64_t fuse_seed = 0;
  fuse_cmd->add_option("--cohort", fuse_cohort_path, "clinical cohort csv")->required();
  fuse_cmd->add_option("--latents", fuse_latents, "latents jsonl")->required();
  fuse_cmd->add_option("--seed", fuse_seed, "rng seed (recorded)");
  fuse_cmd->add_option("--out", fuse_out, "fused cohort csv")->required();
  fuse_cmd->add_option("--manifest", fuse_manifest, "manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help and friends
    std::cerr << e.what() << "\n";
    return 2;
  }

  if (sim_cmd->parsed()) {
    if (sim_form == "nonlinear") {
      sim_config.log_risk_form = LogRiskForm::Nonlinear;
    } else if (sim_form != "linear") {
      throw std::runtime_error("unknown risk form '" + sim_form + "'");
    }
    if (!sim_coef.empty()) {
      sim_config.true_coefficients = parse_number_list(sim_coef, "coefficient");
    } else if (sim_config.log_risk_form == LogRiskForm::Linear) {
      sim_config.true_coefficients.assign(sim_config.feature_dim, 0.0);
      for (std::size_t j = 0; j < sim_config.feature_dim; ++j) {
        sim_config.true_coefficients[j] = j % 2 == 0 ? 0.5 : -0.5;
      }
    }
    if (sim_truth.empty()) sim_truth = sim_out + ".truth.csv";
    if (sim_manifest.empty()) sim_manifest = sim_out + ".manifest.json";

    const Simulation sim = simulate_cohort(sim_config);
    save_cohort(sim.cohort, sim_out);
    save_ground_truth(sim.cohort, sim.truth, sim_truth);

    ManifestBuilder mb("simulate", sim_config.seed, sim_manifest);
    mb.input("--n", sim_config.n);
    mb.input("--dim", sim_config.feature_dim);
    mb.input("--risk-form", sim_form);
    mb.input("--censor-frac", sim_config.target_censor_fraction);
    mb.input("--cohort", sim_out);
    mb.manifest.add_output(sim_out);
    mb.manifest.add_output(sim_truth);
    mb.finish();
    return 0;
  }

  if (split_cmd->parsed()) {
    if (split_manifest.empty()) split_manifest = split_train + ".manifest.json";
    const Cohort cohort = load_cohort(split_in);
    const auto [train, test] = split_cohort(cohort, split_fraction, split_seed);
    save_cohort(train, split_train);
    save_cohort(test, split_test);
    ManifestBuilder mb("split", split_seed, split_manifest);
    mb.input("--cohort", split_in);
    mb.input("--fraction", split_fraction);
    mb.manifest.add_output(split_train);
    mb.manifest.add_output(split_test);
    mb.finish();
    return 0;
  }

  if (project_cmd->parsed()) {
    if (proj_manifest.empty()) proj_manifest = proj_out + ".manifest.json";
    if (proj_output_dim == 0) proj_output_dim = proj_latent_dim;
    if (proj_obs.empty() == proj_cohort.empty()) {
      throw std::runtime_error("project: give exactly one of --observations or --cohort");
    }

    std::vector<std::pair<std::string, std::vector<double>>> observations;
    if (!proj_cohort.empty()) {
      const Cohort cohort = load_cohort(proj_cohort);
      for (const auto& r : cohort.records) observations.emplace_back(r.id, r.features);
    } else {
      std::ifstream in(proj_obs);
      if (!in) throw std::runtime_error("cannot open observations file: " + proj_obs);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        observations.emplace_back(j.at("id").get<std::string>(),
                                  j.at("x").get<std::vector<double>>());
      }
    }
    if (!observations.empty() && observations.front().second.size() != proj_output_dim) {
      throw std::runtime_error("project: observation dimension " +
                               std::to_string(observations.front().second.size()) +
                               " does not match --output-dim " +
                               std::to_string(proj_output_dim));
    }

    const auto generator = make_generator(proj_generator, proj_latent_dim,
                                          proj_output_dim, proj_gen_seed);
    const auto extractor = make_extractor(
        proj_extractor, generator->output_dim(), Rng::derive(proj_gen_seed, 2));
    ProjectionConfig config;
    config.steps = proj_steps;
    config.adam.learning_rate = proj_lr;
    if (!proj_init.empty()) {
      const nlohmann::json j = nlohmann::json::parse(read_file(proj_init));
      config.init = j.at("z").get<std::vector<double>>();
    }

    std::vector<std::pair<std::string, LatentVector>> latents;
    for (const auto& [id, x] : observations) {
      latents.emplace_back(id, project(x, *generator, *extractor, config).z);
    }
    save_latents_jsonl(latents, proj_out);

    ManifestBuilder mb("project", proj_seed, proj_manifest);
    mb.input("--generator", proj_generator);
    mb.input("--extractor", proj_extractor);
    mb.input("--latent-dim", proj_latent_dim);
    mb.input("--steps", proj_steps);
    mb.input("--lr", proj_lr);
    mb.input("--gen-seed", proj_gen_seed);
    mb.input("--source", proj_cohort.empty() ? proj_obs : proj_cohort);
    mb.manifest.add_output(proj_out);
    mb.finish();
    return 0;
  }

  if (fitcox_cmd->parsed()) {
    if (fitcox_manifest.empty()) fitcox_manifest = fitcox_out + ".manifest.json";
    const Cohort cohort = load_cohort(fitcox_in);
    cohort.validate();
    const CoxModel model = fit_coxph(cohort, cox_config);
    const BaselineHazard baseline = breslow_baseline(model, cohort);
    save_cox_model(model, baseline, fitcox_out);
    ManifestBuilder mb("fit-cox", fitcox_seed, fitcox_manifest);
    mb.input("--cohort", fitcox_in);
    mb.input("--ridge", cox_config.ridge_lambda);
    mb.input("--max-iters", cox_config.max_iters);
    mb.input("--tol", cox_config.tolerance);
    mb.manifest.add_output(fitcox_out);
    mb.finish();
    return 0;
  }

  if (fitds_cmd->parsed()) {
    if (fitds_manifest.empty()) fitds_manifest = fitds_out + ".manifest.json";
    if (!fitds_widths.empty()) {
      train_config.hidden_widths.clear();
      for (double w : parse_number_list(fitds_widths, "hidden width")) {
        if (w < 1.0) throw std::runtime_error("hidden widths must be positive");
        train_config.hidden_widths.push_back(static_cast<std::size_t>(w));
      }
    }
    const Cohort cohort = load_cohort(fitds_in);
    const DeepSurvModel model = train_deepsurv(cohort, train_config);
    save_deepsurv_model(model, fitds_out);
    ManifestBuilder mb("fit-deepsurv", train_config.seed, fitds_manifest);
    mb.input("--cohort", fitds_in);
    mb.input("--batch-size", train_config.batch_size);
    mb.input("--lr", train_config.learning_rate);
    mb.input("--dropout", train_config.dropout);
    mb.input("--epochs", train_config.max_epochs);
    mb.input("--patience", train_config.patience);
    mb.manifest.add_output(fitds_out);
    mb.finish();
    return 0;
  }

  if (eval_cmd->parsed()) {
    if (eval_manifest.empty()) eval_manifest = eval_out + ".manifest.json";
    const Cohort cohort = load_cohort(eval_cohort_path);
    cohort.validate();
    const LoadedModel loaded = load_any_model(eval_model);

    std::vector<double> times, risks;
    std::vector<bool> events;
    for (const auto& r : cohort.records) {
      times.push_back(r.time);
      events.push_back(r.event);
    }

    SurvivalPredictor predictor;
    if (loaded.type == "coxph") {
      for (const auto& r : cohort.records) risks.push_back(predict_risk(loaded.cox, r.features));
      BaselineHazard baseline = loaded.baseline;
      if (!eval_baseline_cohort.empty()) {
        baseline = breslow_baseline(loaded.cox, load_cohort(eval_baseline_cohort));
      }
      const CoxModel& model = loaded.cox;
      predictor = [model, baseline](std::span<const double> f, double t) {
        return predict_survival(model, baseline, f, t);
      };
    } else {
      risks = predict_log_risks(loaded.deep, cohort);
      const Cohort baseline_cohort = eval_baseline_cohort.empty()
                                         ? cohort
                                         : load_cohort(eval_baseline_cohort);
      std::vector<double> btimes, brisks;
      std::vector<bool> bevents;
      brisks = predict_log_risks(loaded.deep, baseline_cohort);
      for (const auto& r : baseline_cohort.records) {
        btimes.push_back(r.time);
        bevents.push_back(r.event);
      }
      const BaselineHazard baseline = breslow_baseline(brisks, btimes, bevents);
      auto net = std::make_shared<MlpNetwork>(loaded.deep.network);
      net->mode = MlpMode::Eval;
      predictor = [net, baseline](std::span<const double> f, double t) {
        Matrix row(1, f.size());
        std::copy(f.begin(), f.end(), row.data.begin());
        Rng rng(0);
        const double h = mlp_forward(*net, row, rng).output(0, 0);
        return std::exp(-baseline.value_at(t) * std::exp(h));
      };
    }

    const double c_index = concordance_index(times, events, risks);
    const StepSurvival censor_dist = kaplan_meier(times, events, true);
    const IntegratedBrierResult ib = integrated_brier(predictor, cohort, censor_dist);

    nlohmann::json out;
    out["c_index"] = c_index;
    out["integrated_brier"] = ib.value;
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& [t, bs] : ib.curve) curve.push_back({t, bs});
    out["brier_curve"] = curve;
    out["n"] = cohort.size();
    out["events"] = cohort.event_count();
    atomic_write_file(eval_out, out.dump(2) + "\n");

    ManifestBuilder mb("evaluate", eval_seed, eval_manifest);
    mb.input("--model", eval_model);
    mb.input("--cohort", eval_cohort_path);
    mb.manifest.add_output(eval_out);
    mb.finish();
    return 0;
  }

  if (health_cmd->parsed()) {
    if (health_manifest.empty()) health_manifest = health_out + ".manifest.json";
    const auto latents = load_latents_jsonl(health_latents);
    const Cohort survival = load_cohort(health_survival);
    const Cohort latent_cohort = cohort_from_latents(latents, survival);
    const Attribute attr = health_attribute(latent_cohort, health_ridge);
    save_attribute(attr, health_out);
    ManifestBuilder mb("attribute health", health_seed, health_manifest);
    mb.input("--latents", health_latents);
    mb.input("--survival", health_survival);
    mb.input("--ridge", health_ridge);
    mb.manifest.add_output(health_out);
    mb.finish();
    return 0;
  }

  if (age_cmd->parsed()) {
    if (age_manifest.empty()) age_manifest = age_out + ".manifest.json";
    const auto latents = load_latents_jsonl(age_latents);
    std::map<std::string, double> age_by_id;
    {
      std::ifstream in(age_file);
      if (!in) throw std::runtime_error("cannot open ages file: " + age_file);
      std::string line;
      std::getline(in, line);  // id,age header
      std::size_t row = 1;
      while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
          throw std::runtime_error("ages row " + std::to_string(row) + ": expected id,age");
        }
        age_by_id[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
      }
    }
    std::vector<LatentVector> zs;
    std::vector<double> ages;
    for (const auto& [id, z] : latents) {
      auto it = age_by_id.find(id);
      if (it == age_by_id.end()) {
        throw std::runtime_error("latent id '" + id + "' has no age entry");
      }
      zs.push_back(z);
      ages.push_back(it->second);
    }
    const Attribute attr = age_attribute(zs, ages, age_ridge);
    save_attribute(attr, age_out);
    ManifestBuilder mb("attribute age", age_seed, age_manifest);
    mb.input("--latents", age_latents);
    mb.input("--ages", age_file);
    mb.input("--ridge", age_ridge);
    mb.manifest.add_output(age_out);
    mb.finish();
    return 0;
  }

  if (single_cmd->parsed()) {
    if (single_manifest.empty()) single_manifest = single_out + ".manifest.json";
    const Attribute attr = single_dim_attribute(single_dim_index, single_latent_dim);
    save_attribute(attr, single_out);
    ManifestBuilder mb("attribute single-dim", single_seed, single_manifest);
    mb.input("--dim", single_dim_index);
    mb.input("--latent-dim", single_latent_dim);
    mb.manifest.add_output(single_out);
    mb.finish();
    return 0;
  }

  if (manip_cmd->parsed()) {
    if (manip_manifest.empty()) manip_manifest = manip_out + ".manifest.json";
    const auto latents = load_latents_jsonl(manip_latents);
    const Attribute attr = load_attribute(manip_attr);
    std::vector<std::pair<std::string, LatentVector>> moved;
    for (const auto& [id, z] : latents) {
      if (!manip_id.empty() && id != manip_id) continue;
      moved.emplace_back(id, manipulate(z, attr, manip_beta));
    }
    if (moved.empty()) throw std::runtime_error("manipulate: no matching latent records");
    save_latents_jsonl(moved, manip_out);
    ManifestBuilder mb("manipulate", manip_seed, manip_manifest);
    mb.input("--latents", manip_latents);
    mb.input("--attribute", manip_attr);
    mb.input("--beta", manip_beta);
    mb.manifest.add_output(manip_out);
    mb.finish();
    return 0;
  }

  if (sweep_cmd->parsed()) {
    if (sweep_manifest.empty()) sweep_manifest = sweep_outdir + "/sweep.manifest.json";
    const auto latents = load_latents_jsonl(sweep_latents);
    const Attribute attr = load_attribute(sweep_attr);
    const std::vector<double> betas = parse_number_list(sweep_betas, "beta");
    const std::size_t latent_dim = attr.direction.size();
    std::size_t output_dim = sweep_output_dim;
    if (output_dim == 0) {
      output_dim = sweep_generator == "identity" || sweep_generator == "toy-linear-ortho"
                       ? latent_dim
                       : 64;
    }
    const auto generator = make_generator(sweep_generator, latent_dim, output_dim,
                                          sweep_gen_seed);
    std::filesystem::create_directories(sweep_outdir);

    ManifestBuilder mb("sweep", sweep_seed, sweep_manifest);
    mb.input("--latent", sweep_latents);
    mb.input("--attribute", sweep_attr);
    mb.input("--betas", sweep_betas);
    mb.input("--generator", sweep_generator);
    mb.input("--gen-seed", sweep_gen_seed);

    nlohmann::json files = nlohmann::json::array();
    bool any = false;
    for (const auto& [id, z] : latents) {
      if (!sweep_id.empty() && id != sweep_id) continue;
      any = true;
      for (const auto& [beta, image] : manipulation_sweep(z, attr, betas, *generator)) {
        const std::string name = id + "_beta_" + format_beta(beta) + ".pgm";
        const std::string path = sweep_outdir + "/" + name;
        atomic_write_file(path, render_pgm(image));
        mb.manifest.add_output(path);
        files.push_back(name);
      }
    }
    if (!any) throw std::runtime_error("sweep: no matching latent records");

    const std::string index_path = sweep_outdir + "/sweep.json";
    nlohmann::json index;
    index["generator"] = sweep_generator;
    index["betas"] = betas;
    index["files"] = files;
    atomic_write_file(index_path, index.dump(2) + "\n");
    mb.manifest.add_output(index_path);
    mb.finish();
    return 0;
  }

  if (fuse_cmd->parsed()) {
    if (fuse_manifest.empty()) fuse_manifest = fuse_out + ".manifest.json";
    const Cohort clinical = load_cohort(fuse_cohort_path);
    const auto latents = load_latents_jsonl(fuse_latents);
    std::map<std::string, const LatentVector*> z_by_id;
    for (const auto& [id, z] : latents) z_by_id[id] = &z;

    Cohort fused;
    fused.feature_names = clinical.feature_names;
    const std::size_t latent_dim = latents.empty() ? 0 : latents.front().second.size();
    for (std::size_t j = 0; j < latent_dim; ++j) {
      fused.feature_names.push_back("z" + std::to_string(j));
    }
    for (const auto& r : clinical.records) {
      auto it = z_by_id.find(r.id);
      if (it == z_by_id.end()) {
        throw std::runtime_error("cohort id '" + r.id + "' has no latent record");
      }
      fused.records.push_back(
          {r.id, r.time, r.event, fuse_features(r.features, *it->second)});
    }
    fused.validate();
    save_cohort(fused, fuse_out);
    ManifestBuilder mb("fuse", fuse_seed, fuse_manifest);
    mb.input("--cohort", fuse_cohort_path);
    mb.input("--latents", fuse_latents);
    mb.manifest.add_output(fuse_out);
    mb.finish();
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
