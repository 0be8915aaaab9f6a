// Acceptance suite: one line per criterion, strict budgets, nonzero exit on
// any failure. Usage: acceptance <path-to-cli-binary>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "survlat/artifacts.hpp"
#include "survlat/cohort.hpp"
#include "survlat/coxph.hpp"
#include "survlat/deepsurv.hpp"
#include "survlat/evaluation.hpp"
#include "survlat/latent.hpp"
#include "survlat/mlp.hpp"
#include "survlat/numerics.hpp"

using namespace survlat;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Criterion {
  std::string label;
  double budget_seconds;
  std::chrono::steady_clock::time_point start;
  bool ok = true;
  std::string detail;

  Criterion(std::string l, double budget)
      : label(std::move(l)), budget_seconds(budget),
        start(std::chrono::steady_clock::now()) {}

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
  void finish() {
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start).count();
    if (secs > budget_seconds) {
      ok = false;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "over budget (%.1fs > %.0fs)", secs, budget_seconds);
      note(buf);
    }
    if (!ok) ++g_failures;
    std::printf("[%s] %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", label.c_str(), secs,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

Cohort select_columns(const Cohort& cohort, std::size_t begin, std::size_t end) {
  Cohort out;
  for (std::size_t j = begin; j < end; ++j) {
    out.feature_names.push_back(cohort.feature_names[j]);
  }
  for (const auto& r : cohort.records) {
    out.records.push_back(
        {r.id, r.time, r.event,
         std::vector<double>(r.features.begin() + static_cast<std::ptrdiff_t>(begin),
                             r.features.begin() + static_cast<std::ptrdiff_t>(end))});
  }
  return out;
}

double heldout_c_index(const CoxModel& model, const Cohort& test) {
  std::vector<double> times, risks;
  std::vector<bool> events;
  for (const auto& r : test.records) {
    times.push_back(r.time);
    events.push_back(r.event);
    risks.push_back(predict_risk(model, r.features));
  }
  return concordance_index(times, events, risks);
}

double heldout_c_index(const DeepSurvModel& model, const Cohort& test) {
  std::vector<double> times;
  std::vector<bool> events;
  for (const auto& r : test.records) {
    times.push_back(r.time);
    events.push_back(r.event);
  }
  return concordance_index(times, events, predict_log_risks(model, test));
}

// ---------------------------------------------------------------- 1
void criterion_recovery() {
  Criterion c("1. coefficient recovery: simulate n=2000 d=10 -> fit_coxph, "
              "inf-norm error < 0.1", 30.0);
  SimConfig config;
  config.n = 2000;
  config.feature_dim = 10;
  config.true_coefficients = {1.0, -1.0, 0.5, -0.5, 0.25, 0.0, 0.0, 0.75, -0.25, 0.1};
  config.target_censor_fraction = 0.3;
  config.seed = 20240817;
  const Simulation sim = simulate_cohort(config);
  const CoxModel model = fit_coxph(sim.cohort);
  double inf_err = 0.0;
  for (std::size_t j = 0; j < 10; ++j) {
    inf_err = std::max(inf_err, std::abs(model.coefficients[j] -
                                         config.true_coefficients[j]));
  }
  c.note("inf_err=" + fmt(inf_err) + ", censored=" + fmt(sim.realized_censor_fraction) +
         ", iters=" + std::to_string(model.diagnostics.iterations));
  c.require(inf_err < 0.1, "coefficient error exceeds 0.1");
  c.finish();
}

// ---------------------------------------------------------------- 2
void criterion_gradients() {
  Criterion c("2. gradient suite: cox_nll, deepsurv_loss, mlp_backward, toy vjps "
              "vs central differences (h=1e-5, rel err < 1e-4, 20+ instances each)",
              60.0);
  double worst = 0.0;
  const double h = 1e-5;

  // cox_nll
  Rng rng(1001);
  for (int trial = 0; trial < 20; ++trial) {
    Cohort cohort;
    const std::size_t d = 3;
    for (std::size_t j = 0; j < d; ++j) cohort.feature_names.push_back("f" + std::to_string(j));
    const std::size_t n = 20;
    for (std::size_t i = 0; i < n; ++i) {
      cohort.records.push_back({"r" + std::to_string(i), 1.0 + 50.0 * rng.uniform(),
                                rng.uniform() < 0.7,
                                {rng.normal(), rng.normal(), rng.normal()}});
    }
    if (cohort.event_count() == 0) cohort.records[0].event = true;
    std::vector<double> w{rng.normal(), rng.normal(), rng.normal()};
    const double lambda = trial % 2 == 0 ? 0.0 : 1e-3;
    const auto analytic = cox_nll(w, cohort, lambda);
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> p) { return cox_nll(p, cohort, lambda).loss; }, w, h);
    worst = std::max(worst, oracle::max_grad_rel_error(analytic.gradient, numeric));
  }

  // deepsurv_loss
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng.next_below(12);
    std::vector<double> times, hvals;
    std::vector<bool> events;
    for (std::size_t i = 0; i < n; ++i) {
      times.push_back(trial % 2 == 0 ? 1.0 + 20.0 * rng.uniform()
                                     : static_cast<double>(1 + rng.next_below(4)));
      events.push_back(rng.uniform() < 0.7);
      hvals.push_back(rng.normal());
    }
    events[0] = true;
    Matrix col(n, 1);
    for (std::size_t i = 0; i < n; ++i) col(i, 0) = hvals[i];
    const auto result = deepsurv_loss(col, times, events);
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> p) {
          Matrix probe(n, 1);
          for (std::size_t i = 0; i < n; ++i) probe(i, 0) = p[i];
          return deepsurv_loss(probe, times, events).loss;
        },
        hvals, h);
    worst = std::max(worst,
                     oracle::max_grad_rel_error(result.dlog_risk.data, numeric));
  }

  // mlp_backward across the layer-configuration matrix. Instances whose
  // ReLU pre-activations sit within the finite-difference step of the kink
  // are resampled: central differences are not a valid oracle there.
  int mlp_instances = 0;
  std::uint64_t draw_seed = 2000;
  for (bool batch_norm : {false, true}) {
    for (bool dropout : {false, true}) {
      for (Activation act : {Activation::Linear, Activation::Relu}) {
        int done = 0;
        while (done < 3) {
          ++draw_seed;
          Rng build(draw_seed);
          MlpNetwork net;
          net.dropout_rate = dropout ? 0.4 : 0.0;
          net.mode = MlpMode::Train;
          MlpLayer l1;
          l1.weights = Matrix(3, 5);
          for (double& v : l1.weights.data) v = build.normal();
          l1.bias.assign(5, 0.0);
          for (double& v : l1.bias) v = 0.1 * build.normal();
          if (batch_norm) {
            BatchNorm bn;
            bn.scale.assign(5, 1.0);
            bn.shift.assign(5, 0.0);
            for (double& v : bn.scale) v = 1.0 + 0.2 * build.normal();
            for (double& v : bn.shift) v = 0.2 * build.normal();
            bn.running_mean.assign(5, 0.0);
            bn.running_var.assign(5, 1.0);
            l1.batch_norm = std::move(bn);
          }
          l1.activation = act;
          l1.dropout = dropout;
          MlpLayer l2;
          l2.weights = Matrix(5, 1);
          for (double& v : l2.weights.data) v = build.normal();
          l2.bias.assign(1, 0.0);
          net.layers.push_back(std::move(l1));
          net.layers.push_back(std::move(l2));

          Matrix batch(8, 3), upstream(8, 1);
          for (double& v : batch.data) v = build.normal();
          for (double& v : upstream.data) v = build.normal();
          const std::uint64_t mask_seed = 3000 + draw_seed;

          MlpNetwork run = net;
          Rng mask(mask_seed);
          const auto fwd = mlp_forward(run, batch, mask);
          if (act == Activation::Relu) {
            bool near_kink = false;
            for (double v : fwd.cache.layers[0].pre_activation.data) {
              if (std::abs(v) < 1e-3) near_kink = true;
            }
            if (near_kink) continue;
          }
          ++done;
          ++mlp_instances;

          const std::vector<double> params = mlp_parameters(net);
          auto loss_at = [&](std::span<const double> p) {
            MlpNetwork probe = net;
            set_mlp_parameters(probe, p);
            Rng probe_mask(mask_seed);
            const auto probe_fwd = mlp_forward(probe, batch, probe_mask);
            double s = 0.0;
            for (std::size_t i = 0; i < probe_fwd.output.data.size(); ++i) {
              s += probe_fwd.output.data[i] * upstream.data[i];
            }
            return s;
          };
          const auto grads = mlp_backward(run, fwd.cache, upstream);
          worst = std::max(worst,
                           oracle::max_grad_rel_error(flatten_gradients(grads),
                                                      finite_diff_grad(loss_at, params, h)));
        }
      }
    }
  }

  // toy generator / extractor vjps
  const IdentityGenerator ident(6);
  const LinearGenerator linear(8, 6, 17);
  const LinearGenerator ortho = LinearGenerator::orthonormal(6, 18);
  const MlpGenerator mlpgen(6, 9, 19);
  const IdentityExtractor ixt(6);
  const LinearExtractor lxt(5, 6, 20);
  auto vjp_check = [&](const auto& map, std::size_t in_dim, std::size_t out_dim) {
    std::vector<double> z(in_dim), upstream(out_dim);
    for (double& v : z) v = rng.normal();
    for (double& v : upstream) v = rng.normal();
    const auto analytic = map.vjp(z, upstream);
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> p) {
          const auto out = map.forward(p);
          double s = 0.0;
          for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * upstream[i];
          return s;
        },
        z, h);
    worst = std::max(worst, oracle::max_grad_rel_error(analytic, numeric));
  };
  for (int trial = 0; trial < 20; ++trial) {
    vjp_check(ident, 6, 6);
    vjp_check(linear, 6, 8);
    vjp_check(ortho, 6, 6);
    vjp_check(mlpgen, 6, 9);
    vjp_check(ixt, 6, 6);
    vjp_check(lxt, 6, 5);
  }

  c.note("worst rel err=" + fmt(worst));
  c.require(worst < 1e-4, "a gradient disagrees with finite differences");
  c.finish();
}

// ---------------------------------------------------------------- 3
void criterion_metric_oracles() {
  Criterion c("3. metric oracles: c-index exact, KM/Brier/IBS within 1e-12 of "
              "brute force on 100 random cohorts (n <= 50)", 30.0);
  Rng rng(777);
  double worst_km = 0.0, worst_bs = 0.0, worst_ibs = 0.0;
  int exact_c = 0, cohorts = 0;
  while (cohorts < 100) {
    const std::size_t n = 5 + rng.next_below(46);
    std::vector<double> times, risks;
    std::vector<bool> events;
    const bool with_ties = cohorts % 2 == 0;
    bool any_event = false;
    for (std::size_t i = 0; i < n; ++i) {
      times.push_back(with_ties ? static_cast<double>(1 + rng.next_below(10))
                                : 1.0 + 99.0 * rng.uniform());
      const bool e = rng.uniform() < 0.65;
      events.push_back(e);
      any_event = any_event || e;
      risks.push_back(with_ties ? std::floor(5.0 * rng.uniform()) : rng.normal());
    }
    if (!any_event) continue;
    ++cohorts;

    // c-index: exact equality with the pair-count oracle
    bool fast_threw = false, slow_threw = false;
    double fast = 0.0, slow = 0.0;
    try {
      fast = concordance_index(times, events, risks);
    } catch (const std::runtime_error&) { fast_threw = true; }
    try {
      slow = oracle::concordance_index(times, events, risks);
    } catch (const std::runtime_error&) { slow_threw = true; }
    if (fast_threw != slow_threw || (!fast_threw && fast != slow)) {
      c.require(false, "c-index mismatch on cohort " + std::to_string(cohorts));
    } else {
      ++exact_c;
    }

    // KM against brute-force product limit at several horizons
    for (bool for_censoring : {false, true}) {
      const StepSurvival s = kaplan_meier(times, events, for_censoring);
      for (double q : {0.2, 0.5, 0.9}) {
        const double t = 1.0 + q * 99.0;
        worst_km = std::max(worst_km,
                            std::abs(s.value_at(t) - oracle::kaplan_meier_at(
                                                         times, events, t, for_censoring)));
      }
    }

    // Brier at mid-horizon, plus integrated-vs-decomposed
    Cohort cohort;
    cohort.feature_names = {"f0"};
    std::vector<std::vector<double>> feats;
    for (std::size_t i = 0; i < n; ++i) {
      cohort.records.push_back({"r" + std::to_string(i), times[i], events[i], {risks[i]}});
      feats.push_back({risks[i]});
    }
    const StepSurvival censor_dist = kaplan_meier(times, events, true);
    const SurvivalPredictor pred = [](std::span<const double> f, double t) {
      return 1.0 / (1.0 + std::exp(f[0] - 0.02 * t));
    };
    double horizon = 0.0;
    for (double t : times) horizon = std::max(horizon, t);
    horizon *= 0.5;
    try {
      const double fast_bs = brier_score(pred, cohort, horizon, censor_dist);
      const double slow_bs = oracle::brier_score(
          [&](const std::vector<double>& f, double t) { return pred(f, t); }, feats,
          times, events, horizon);
      worst_bs = std::max(worst_bs, std::abs(fast_bs - slow_bs));
    } catch (const std::runtime_error&) {
      // degenerate weight at this horizon; fine for random cohorts
    }
    try {
      const auto ib = integrated_brier(pred, cohort, censor_dist);
      double integral = 0.0;
      for (std::size_t i = 0; i + 1 < ib.curve.size(); ++i) {
        integral += 0.5 * (ib.curve[i].second + ib.curve[i + 1].second) *
                    (ib.curve[i + 1].first - ib.curve[i].first);
      }
      integral /= ib.curve.back().first - ib.curve.front().first;
      worst_ibs = std::max(worst_ibs, std::abs(ib.value - integral));
    } catch (const std::runtime_error&) {
    }
  }
  c.note("exact c-index matches=" + std::to_string(exact_c) + "/100, worst KM=" +
         fmt(worst_km) + ", worst Brier=" + fmt(worst_bs) + ", worst IBS=" + fmt(worst_ibs));
  c.require(exact_c == 100, "c-index not exactly equal on every cohort");
  c.require(worst_km < 1e-12, "KM deviates beyond 1e-12");
  c.require(worst_bs < 1e-12, "Brier deviates beyond 1e-12");
  c.require(worst_ibs < 1e-12, "integrated Brier deviates beyond 1e-12");
  c.finish();
}

// ---------------------------------------------------------------- 4
void criterion_parity_separation() {
  Criterion c("4. model families: DeepSurv within 0.02 of CoxPH on linear data; "
              "ahead by >= 0.05 on the fixed nonlinear data", 600.0);

  // linear parity
  SimConfig lin;
  lin.n = 4000;
  lin.feature_dim = 10;
  lin.true_coefficients = {1.0, -0.8, 0.6, -0.5, 0.4, 0.3, -0.3, 0.2, -0.2, 0.5};
  lin.target_censor_fraction = 0.3;
  lin.seed = 2024;
  const Simulation lin_sim = simulate_cohort(lin);
  const auto [lin_train, lin_test] = split_cohort(lin_sim.cohort, 0.8, 41);

  const CoxModel lin_cox = fit_coxph(lin_train);
  TrainConfig ds_config;
  ds_config.seed = 5;
  const DeepSurvModel lin_ds = train_deepsurv(lin_train, ds_config);
  const double c_cox_lin = heldout_c_index(lin_cox, lin_test);
  const double c_ds_lin = heldout_c_index(lin_ds, lin_test);

  // nonlinear separation: h* = f0 f1 + sin f2
  SimConfig non;
  non.n = 4000;
  non.feature_dim = 10;
  non.log_risk_form = LogRiskForm::Nonlinear;
  non.target_censor_fraction = 0.3;
  non.seed = 77;
  const Simulation non_sim = simulate_cohort(non);
  const auto [non_train, non_test] = split_cohort(non_sim.cohort, 0.8, 43);

  const CoxModel non_cox = fit_coxph(non_train);
  const DeepSurvModel non_ds = train_deepsurv(non_train, ds_config);
  const double c_cox_non = heldout_c_index(non_cox, non_test);
  const double c_ds_non = heldout_c_index(non_ds, non_test);

  c.note("linear cox=" + fmt(c_cox_lin) + " ds=" + fmt(c_ds_lin) + " |diff|=" +
         fmt(std::abs(c_cox_lin - c_ds_lin)) + "; nonlinear cox=" + fmt(c_cox_non) +
         " ds=" + fmt(c_ds_non) + " gap=" + fmt(c_ds_non - c_cox_non));
  c.require(std::abs(c_cox_lin - c_ds_lin) <= 0.02, "linear parity beyond 0.02");
  c.require(c_ds_non - c_cox_non >= 0.05, "nonlinear advantage below 0.05");
  c.finish();
}

// ---------------------------------------------------------------- 5
void criterion_fusion() {
  Criterion c("5. fusion gain: fused clinical+latent beats each block alone "
              "by >= 0.03 held-out C-index", 300.0);
  const std::size_t n = 2000, dc = 5, dz = 512;
  SimConfig config;
  config.n = n;
  config.feature_dim = dc + dz;
  config.true_coefficients.assign(dc + dz, 0.0);
  config.true_coefficients[0] = 0.9;
  config.true_coefficients[1] = -0.7;
  config.true_coefficients[2] = 0.5;
  config.true_coefficients[3] = -0.4;
  config.true_coefficients[4] = 0.3;
  Rng pick(99);
  for (int k = 0; k < 10; ++k) {
    std::size_t j;
    do {
      j = dc + static_cast<std::size_t>(pick.next_below(dz));
    } while (config.true_coefficients[j] != 0.0);
    config.true_coefficients[j] = pick.uniform() < 0.5 ? -0.6 : 0.6;
  }
  config.target_censor_fraction = 0.3;
  config.seed = 424242;
  const Simulation sim = simulate_cohort(config);
  const auto [train, test] = split_cohort(sim.cohort, 0.8, 47);

  const Cohort clin_train = select_columns(train, 0, dc);
  const Cohort clin_test = select_columns(test, 0, dc);
  const Cohort lat_train = select_columns(train, dc, dc + dz);
  const Cohort lat_test = select_columns(test, dc, dc + dz);

  const double c_clin = heldout_c_index(fit_coxph(clin_train), clin_test);
  const double c_lat = heldout_c_index(fit_coxph(lat_train), lat_test);
  const double c_fused = heldout_c_index(fit_coxph(train), test);
  const double gain = c_fused - std::max(c_clin, c_lat);
  c.note("clinical=" + fmt(c_clin) + ", latent=" + fmt(c_lat) + ", fused=" +
         fmt(c_fused) + ", gain=" + fmt(gain));
  c.require(gain >= 0.03, "fusion gain below 0.03");
  c.finish();
}

// ---------------------------------------------------------------- 6
void criterion_projection() {
  Criterion c("6. projection: 800 Adam steps (lr 0.01) through identity and "
              "orthonormal generators reach loss < 1e-6 and inf-err < 1e-2", 10.0);
  const std::size_t dim = 512;
  Rng rng(11);
  std::vector<double> z_star(dim);
  for (double& v : z_star) v = rng.uniform(-1.0, 1.0);

  const IdentityGenerator ident(dim);
  const IdentityExtractor phi(dim);
  const ProjectionResult ir = project(z_star, ident, phi, ProjectionConfig{});
  double ident_err = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    ident_err = std::max(ident_err, std::abs(ir.z[i] - z_star[i]));
  }

  const LinearGenerator ortho = LinearGenerator::orthonormal(dim, 13);
  const std::vector<double> x_real = ortho.forward(z_star);
  const ProjectionResult lr = project(x_real, ortho, phi, ProjectionConfig{});
  double ortho_err = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    ortho_err = std::max(ortho_err, std::abs(lr.z[i] - z_star[i]));
  }

  c.note("identity loss=" + fmt(ir.loss_trace.back()) + " err=" + fmt(ident_err) +
         "; ortho loss=" + fmt(lr.loss_trace.back()) + " err=" + fmt(ortho_err));
  c.require(ir.loss_trace.back() < 1e-6, "identity objective above 1e-6");
  c.require(ident_err < 1e-2, "identity latent error above 1e-2");
  c.require(lr.loss_trace.back() < 1e-6, "orthonormal objective above 1e-6");
  c.require(ortho_err < 1e-2, "orthonormal latent error above 1e-2");
  c.finish();
}

// ---------------------------------------------------------------- 7
void criterion_manipulation_algebra() {
  Criterion c("7. manipulation algebra: risk(z + beta w) - risk(z) = beta ||w||^2 "
              "within 1e-10 across the beta grid", 1.0);
  SimConfig config;
  config.n = 800;
  config.feature_dim = 16;
  config.true_coefficients.assign(16, 0.0);
  config.true_coefficients[0] = 1.2;
  config.true_coefficients[3] = -0.8;
  config.target_censor_fraction = 0.3;
  config.seed = 97;
  const Simulation sim = simulate_cohort(config);
  const Attribute attr = health_attribute(sim.cohort);

  CoxModel model;
  model.coefficients = attr.direction;
  double norm_sq = 0.0;
  for (double v : attr.direction) norm_sq += v * v;

  Rng rng(101);
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> z(16);
    for (double& v : z) v = rng.normal();
    for (double beta : {-10.0, -5.0, 0.0, 5.0, 10.0, 20.0}) {
      const double delta =
          predict_risk(model, manipulate(z, attr, beta)) - predict_risk(model, z);
      worst = std::max(worst, std::abs(delta - beta * norm_sq));
    }
  }
  c.note("||w||^2=" + fmt(norm_sq) + ", worst deviation=" + fmt(worst));
  c.require(worst < 1e-10, "algebraic identity violated beyond 1e-10");
  c.finish();
}

// ---------------------------------------------------------------- 8
struct CliRunner {
  std::string binary;
  fs::path dir;

  void run(const std::string& args) const {
    const std::string cmd = "cd " + dir.string() + " && " + binary + " " + args +
                            " > /dev/null 2> cli_stderr.log";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) {
      std::string err;
      try { err = read_file((dir / "cli_stderr.log").string()); } catch (...) {}
      throw std::runtime_error("cli command failed (" + args + "): " + err);
    }
  }
};

void run_pipeline(const CliRunner& cli) {
  cli.run("simulate --n 300 --dim 16 --censor-frac 0.4 --seed 7 --out cohort.csv");
  cli.run("split --cohort cohort.csv --fraction 0.8 --seed 3 --out-train train.csv "
          "--out-test test.csv");
  cli.run("project --cohort train.csv --generator identity --latent-dim 16 "
          "--steps 800 --seed 9 --out latents.jsonl");
  cli.run("fit-cox --cohort train.csv --seed 0 --out cox.json");
  cli.run("fit-deepsurv --cohort train.csv --batch-size 64 --epochs 6 --hidden 32,16 "
          "--seed 5 --out deepsurv.json");
  cli.run("evaluate --model cox.json --cohort test.csv --seed 0 --out eval_cox.json");
  cli.run("evaluate --model deepsurv.json --cohort test.csv --seed 0 --out eval_ds.json");
  cli.run("attribute health --latents latents.jsonl --survival train.csv --seed 0 "
          "--out health.json");
  cli.run("attribute age --latents latents.jsonl --ages ages.csv --seed 0 --out age.json");
  cli.run("attribute single-dim --dim 3 --latent-dim 16 --seed 0 --out basis.json");
  cli.run("manipulate --latents latents.jsonl --attribute health.json --beta 5 "
          "--seed 0 --out moved.jsonl");
  cli.run("sweep --latent latents.jsonl --attribute health.json "
          "--betas -10,-5,0,5,10,20 --generator toy-mlp --id s000000 --seed 0 "
          "--out-dir sweep");
  cli.run("fuse --cohort train.csv --latents latents.jsonl --seed 0 --out fused.csv");
}

void criterion_determinism(const std::string& cli_binary) {
  Criterion c("8. determinism: every CLI command re-run with identical flags and "
              "seeds produces byte-identical artifacts", 120.0);
  const fs::path dir = fs::temp_directory_path() / "survlat_acceptance_pipeline";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CliRunner cli{cli_binary, dir};

  // ages input derived deterministically from record ids
  {
    std::string ages = "id,age\n";
    for (int i = 0; i < 300; ++i) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "s%06d,%d\n", i, 45 + (i * 7) % 40);
      ages += buf;
    }
    atomic_write_file((dir / "ages.csv").string(), ages);
  }

  run_pipeline(cli);

  // snapshot every artifact and manifest
  std::map<std::string, std::string> first_run;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).string();
    if (rel == "cli_stderr.log") continue;
    first_run[rel] = fnv1a64_hex(read_file(entry.path().string()));
  }

  run_pipeline(cli);

  std::size_t compared = 0, mismatched = 0;
  for (const auto& [rel, digest] : first_run) {
    ++compared;
    const std::string now = fnv1a64_hex(read_file((dir / rel).string()));
    if (now != digest) {
      ++mismatched;
      c.require(false, "artifact differs between runs: " + rel);
    }
  }
  // manifest digests must also agree with the artifacts they describe
  std::size_t manifest_outputs = 0;
  for (const auto& [rel, digest] : first_run) {
    if (rel.size() < 14 || rel.substr(rel.size() - 14) != ".manifest.json") continue;
    const auto manifest = nlohmann::json::parse(read_file((dir / rel).string()));
    for (const auto& out : manifest.at("outputs")) {
      ++manifest_outputs;
      const std::string path = out.at("path").get<std::string>();
      const std::string want = out.at("digest").get<std::string>();
      const fs::path resolved = fs::path(path).is_absolute() ? fs::path(path) : dir / path;
      if (fnv1a64_hex(read_file(resolved.string())) != want) {
        c.require(false, "manifest digest stale for " + path);
      }
    }
  }
  c.note(std::to_string(compared) + " artifacts byte-identical across runs, " +
         std::to_string(manifest_outputs) + " manifest digests verified" +
         (mismatched ? "" : ""));
  c.finish();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path-to-cli-binary>\n");
    return 2;
  }
  const std::string cli_binary = fs::absolute(argv[1]).string();
  std::printf("acceptance suite\n----------------\n");
  criterion_recovery();
  criterion_gradients();
  criterion_metric_oracles();
  criterion_parity_separation();
  criterion_fusion();
  criterion_projection();
  criterion_manipulation_algebra();
  criterion_determinism(cli_binary);
  std::printf("----------------\n%s (%d failure%s)\n",
              g_failures == 0 ? "ALL CRITERIA PASSED" : "CRITERIA FAILED",
              g_failures, g_failures == 1 ? "" : "s");
  return g_failures == 0 ? 0 : 1;
}
