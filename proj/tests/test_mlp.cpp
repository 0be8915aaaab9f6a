#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "survlat/mlp.hpp"

using namespace survlat;

namespace {

Matrix random_batch(std::size_t n, std::size_t d, Rng& rng) {
  Matrix m(n, d);
  for (double& v : m.data) v = rng.normal();
  return m;
}

// Loss used for gradient checks: weighted sum of outputs so dLoss/dOut is a
// fixed matrix.
double weighted_output_sum(const Matrix& out, const Matrix& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * weights.data[i];
  return s;
}

MlpNetwork small_net(std::size_t in, std::size_t hidden, bool batch_norm,
                     bool dropout, Activation hidden_act, Rng& rng) {
  MlpNetwork net;
  net.dropout_rate = dropout ? 0.4 : 0.0;
  net.mode = MlpMode::Train;
  MlpLayer l1;
  l1.weights = Matrix(in, hidden);
  for (double& v : l1.weights.data) v = rng.normal();
  l1.bias.assign(hidden, 0.0);
  for (double& v : l1.bias) v = 0.1 * rng.normal();
  if (batch_norm) {
    BatchNorm bn;
    bn.scale.assign(hidden, 0.0);
    bn.shift.assign(hidden, 0.0);
    for (double& v : bn.scale) v = 1.0 + 0.2 * rng.normal();
    for (double& v : bn.shift) v = 0.2 * rng.normal();
    bn.running_mean.assign(hidden, 0.0);
    bn.running_var.assign(hidden, 1.0);
    l1.batch_norm = std::move(bn);
  }
  l1.activation = hidden_act;
  l1.dropout = dropout;
  MlpLayer l2;
  l2.weights = Matrix(hidden, 1);
  for (double& v : l2.weights.data) v = rng.normal();
  l2.bias.assign(1, 0.05);
  l2.activation = Activation::Linear;
  net.layers.push_back(std::move(l1));
  net.layers.push_back(std::move(l2));
  return net;
}

}  // namespace

TEST_CASE("identity single layer reproduces its input") {
  MlpNetwork net;
  net.mode = MlpMode::Train;
  MlpLayer layer;
  layer.weights = Matrix(3, 3);
  for (std::size_t i = 0; i < 3; ++i) layer.weights(i, i) = 1.0;
  layer.bias.assign(3, 0.0);
  layer.activation = Activation::Linear;
  net.layers.push_back(std::move(layer));

  Rng rng(1);
  Matrix batch = random_batch(4, 3, rng);
  const auto got = mlp_forward(net, batch, rng);
  for (std::size_t i = 0; i < batch.data.size(); ++i) {
    CHECK(got.output.data[i] == batch.data[i]);
  }
}

TEST_CASE("eval forward ignores the rng and is repeatable") {
  Rng init(3);
  MlpNetwork net = make_survival_mlp(5, {8, 4}, 0.4, init);
  net.mode = MlpMode::Eval;
  Rng data(4);
  Matrix batch = random_batch(6, 5, data);
  Rng r1(100), r2(999);
  const auto a = mlp_forward(net, batch, r1);
  const auto b = mlp_forward(net, batch, r2);
  CHECK(a.output.data == b.output.data);
}

TEST_CASE("train-mode dropout is mean-preserving via inverted scaling") {
  // Single linear layer with dropout; average over many masks approaches the
  // eval output.
  MlpNetwork net;
  net.dropout_rate = 0.4;
  MlpLayer layer;
  layer.weights = Matrix(2, 2);
  layer.weights(0, 0) = 1.0;
  layer.weights(1, 1) = 1.0;
  layer.bias.assign(2, 0.0);
  layer.activation = Activation::Linear;
  layer.dropout = true;
  net.layers.push_back(std::move(layer));

  Matrix batch(2, 2);
  batch(0, 0) = 1.5;
  batch(0, 1) = -2.0;
  batch(1, 0) = 0.5;
  batch(1, 1) = 3.0;

  net.mode = MlpMode::Eval;
  Rng r0(0);
  const Matrix eval_out = mlp_forward(net, batch, r0).output;

  net.mode = MlpMode::Train;
  Rng rng(2024);
  Matrix mean(2, 2);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const Matrix out = mlp_forward(net, batch, rng).output;
    for (std::size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += out.data[i];
  }
  for (std::size_t i = 0; i < mean.data.size(); ++i) {
    mean.data[i] /= draws;
    CHECK(std::abs(mean.data[i] - eval_out.data[i]) <
          0.02 * std::abs(eval_out.data[i]));
  }
}

TEST_CASE("train-mode batch norm normalizes each feature") {
  Rng rng(9);
  MlpNetwork net = make_survival_mlp(4, {6}, 0.0, rng);
  net.mode = MlpMode::Train;
  Matrix batch = random_batch(16, 4, rng);
  const auto fwd = mlp_forward(net, batch, rng);
  const Matrix& xhat = fwd.cache.layers[0].normalized;
  for (std::size_t j = 0; j < xhat.cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < xhat.rows; ++i) mean += xhat(i, j);
    mean /= static_cast<double>(xhat.rows);
    double var = 0.0;
    for (std::size_t i = 0; i < xhat.rows; ++i) {
      var += (xhat(i, j) - mean) * (xhat(i, j) - mean);
    }
    var /= static_cast<double>(xhat.rows);
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("batch norm rejects train-mode batches of one row") {
  Rng rng(10);
  MlpNetwork net = make_survival_mlp(4, {6}, 0.0, rng);
  net.mode = MlpMode::Train;
  Matrix batch = random_batch(1, 4, rng);
  CHECK_THROWS_AS(mlp_forward(net, batch, rng), std::invalid_argument);
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
  Rng rng(21);
  MlpNetwork net = small_net(3, 5, true, false, Activation::Relu, rng);
  Matrix batch = random_batch(8, 3, rng);
  const auto fwd = mlp_forward(net, batch, rng);
  const Matrix zero(8, 1);
  const auto grads = mlp_backward(net, fwd.cache, zero);
  for (const auto& lg : grads.layers) {
    for (double v : lg.weights.data) CHECK(v == 0.0);
    for (double v : lg.bias) CHECK(v == 0.0);
    for (double v : lg.scale) CHECK(v == 0.0);
    for (double v : lg.shift) CHECK(v == 0.0);
  }
}

TEST_CASE("backward rejects eval-mode caches") {
  Rng rng(22);
  MlpNetwork net = small_net(3, 5, false, false, Activation::Relu, rng);
  net.mode = MlpMode::Eval;
  Matrix batch = random_batch(4, 3, rng);
  const auto fwd = mlp_forward(net, batch, rng);
  Matrix dout(4, 1, 1.0);
  CHECK_THROWS_AS(mlp_backward(net, fwd.cache, dout), std::invalid_argument);
}

TEST_CASE("analytic gradients match finite differences across the layer matrix") {
  // Every combination of batch norm, dropout, and activation.
  std::size_t config_index = 0;
  for (bool batch_norm : {false, true}) {
    for (bool dropout : {false, true}) {
      for (Activation act : {Activation::Linear, Activation::Relu}) {
        ++config_index;
        Rng build(100 + config_index);
        MlpNetwork net = small_net(3, 5, batch_norm, dropout, act, build);
        Rng data(200 + config_index);
        Matrix batch = random_batch(8, 3, data);
        Matrix loss_weights = random_batch(8, 1, data);

        const std::uint64_t mask_seed = 300 + config_index;
        std::vector<double> params = mlp_parameters(net);

        auto loss_at = [&](std::span<const double> p) {
          MlpNetwork probe = net;
          set_mlp_parameters(probe, p);
          Rng mask_rng(mask_seed);
          const auto fwd = mlp_forward(probe, batch, mask_rng);
          return weighted_output_sum(fwd.output, loss_weights);
        };

        Rng mask_rng(mask_seed);
        MlpNetwork run = net;
        const auto fwd = mlp_forward(run, batch, mask_rng);
        const auto grads = mlp_backward(run, fwd.cache, loss_weights);
        const auto analytic = flatten_gradients(grads);
        const auto numeric = finite_diff_grad(loss_at, params, 1e-5);
        CHECK(oracle::max_grad_rel_error(analytic, numeric) < 1e-4);
      }
    }
  }
}

TEST_CASE("backward is bit deterministic under a fixed mask seed") {
  Rng build(55);
  MlpNetwork net = small_net(4, 6, true, true, Activation::Relu, build);
  Rng data(56);
  Matrix batch = random_batch(8, 4, data);
  Matrix dout = random_batch(8, 1, data);
  auto run = [&] {
    MlpNetwork copy = net;
    Rng mask(77);
    const auto fwd = mlp_forward(copy, batch, mask);
    return flatten_gradients(mlp_backward(copy, fwd.cache, dout));
  };
  CHECK(run() == run());
}

TEST_CASE("running statistics move toward batch statistics in train mode") {
  Rng rng(60);
  MlpNetwork net = make_survival_mlp(3, {4}, 0.0, rng);
  net.mode = MlpMode::Train;
  Matrix batch = random_batch(32, 3, rng);
  const auto before = net.layers[0].batch_norm->running_mean;
  (void)mlp_forward(net, batch, rng);
  const auto after = net.layers[0].batch_norm->running_mean;
  CHECK(before != after);
}
