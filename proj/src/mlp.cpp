#include "survlat/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace survlat {

MlpNetwork make_survival_mlp(std::size_t input_dim,
                             const std::vector<std::size_t>& hidden_widths,
                             double dropout_rate, Rng& rng) {
  MlpNetwork net;
  net.dropout_rate = dropout_rate;
  net.mode = MlpMode::Train;
  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_widths.begin(), hidden_widths.end());
  dims.push_back(1);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    MlpLayer layer;
    layer.weights = Matrix(dims[i], dims[i + 1]);
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[i]));
    for (double& w : layer.weights.data) w = rng.uniform(-bound, bound);
    layer.bias.assign(dims[i + 1], 0.0);
    const bool last = i + 2 == dims.size();
    if (!last) {
      BatchNorm bn;
      bn.scale.assign(dims[i + 1], 1.0);
      bn.shift.assign(dims[i + 1], 0.0);
      bn.running_mean.assign(dims[i + 1], 0.0);
      bn.running_var.assign(dims[i + 1], 1.0);
      layer.batch_norm = std::move(bn);
      layer.activation = Activation::Relu;
      layer.dropout = true;
    } else {
      layer.activation = Activation::Linear;
      layer.dropout = false;
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

MlpForwardResult mlp_forward(MlpNetwork& net, const Matrix& batch, Rng& rng) {
  if (batch.cols != net.input_dim()) {
    throw std::invalid_argument("mlp_forward: batch width does not match input dim");
  }
  const bool train = net.mode == MlpMode::Train;
  const std::size_t n = batch.rows;

  MlpForwardResult result;
  result.cache.mode = net.mode;
  Matrix a = batch;
  for (MlpLayer& layer : net.layers) {
    LayerCache lc;
    lc.input = a;
    const std::size_t dout = layer.weights.cols;

    Matrix z = matmul(a, layer.weights);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dout; ++j) z(i, j) += layer.bias[j];
    lc.pre_norm = z;

    Matrix y = z;
    if (layer.batch_norm) {
      BatchNorm& bn = *layer.batch_norm;
      std::vector<double> mean(dout), var(dout);
      if (train) {
        if (n < 2) {
          throw std::invalid_argument(
              "mlp_forward: train-mode batch norm needs batch size >= 2");
        }
        for (std::size_t j = 0; j < dout; ++j) {
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) s += z(i, j);
          mean[j] = s / static_cast<double>(n);
        }
        for (std::size_t j = 0; j < dout; ++j) {
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const double d = z(i, j) - mean[j];
            s += d * d;
          }
          var[j] = s / static_cast<double>(n);
        }
        for (std::size_t j = 0; j < dout; ++j) {
          bn.running_mean[j] = kBatchNormMomentum * bn.running_mean[j] +
                               (1.0 - kBatchNormMomentum) * mean[j];
          bn.running_var[j] = kBatchNormMomentum * bn.running_var[j] +
                              (1.0 - kBatchNormMomentum) * var[j];
        }
      } else {
        mean = bn.running_mean;
        var = bn.running_var;
      }
      Matrix xhat(n, dout);
      for (std::size_t j = 0; j < dout; ++j) {
        const double inv = 1.0 / std::sqrt(var[j] + kBatchNormEpsilon);
        for (std::size_t i = 0; i < n; ++i) {
          xhat(i, j) = (z(i, j) - mean[j]) * inv;
          y(i, j) = bn.scale[j] * xhat(i, j) + bn.shift[j];
        }
      }
      lc.batch_mean = std::move(mean);
      lc.batch_var = std::move(var);
      lc.normalized = std::move(xhat);
    }
    lc.pre_activation = y;

    Matrix act = y;
    if (layer.activation == Activation::Relu) {
      for (double& v : act.data) v = v > 0.0 ? v : 0.0;
    }
    lc.activated = act;

    if (layer.dropout && train && net.dropout_rate > 0.0) {
      const double keep_scale = 1.0 / (1.0 - net.dropout_rate);
      Matrix mask(n, dout);
      for (std::size_t i = 0; i < mask.data.size(); ++i) {
        mask.data[i] = rng.uniform() >= net.dropout_rate ? keep_scale : 0.0;
        act.data[i] *= mask.data[i];
      }
      lc.dropout_mask = std::move(mask);
    }

    a = act;
    result.cache.layers.push_back(std::move(lc));
  }
  result.output = std::move(a);
  return result;
}

MlpGradients mlp_backward(const MlpNetwork& net, const MlpCache& cache,
                          const Matrix& dloss_doutput) {
  if (cache.mode != MlpMode::Train) {
    throw std::invalid_argument("mlp_backward: cache is not from a train-mode forward");
  }
  if (cache.layers.size() != net.layers.size()) {
    throw std::invalid_argument("mlp_backward: cache does not match network");
  }

  MlpGradients grads;
  grads.layers.resize(net.layers.size());
  Matrix dout = dloss_doutput;
  for (std::size_t li = net.layers.size(); li > 0; --li) {
    const std::size_t l = li - 1;
    const MlpLayer& layer = net.layers[l];
    const LayerCache& lc = cache.layers[l];
    const std::size_t n = lc.input.rows;
    const std::size_t dcols = layer.weights.cols;

    Matrix dact = std::move(dout);
    if (lc.dropout_mask.rows > 0) {
      for (std::size_t i = 0; i < dact.data.size(); ++i)
        dact.data[i] *= lc.dropout_mask.data[i];
    }

    Matrix dy = std::move(dact);
    if (layer.activation == Activation::Relu) {
      for (std::size_t i = 0; i < dy.data.size(); ++i) {
        if (lc.pre_activation.data[i] <= 0.0) dy.data[i] = 0.0;
      }
    }

    Matrix dz;
    LayerGradients lg;
    if (layer.batch_norm) {
      const BatchNorm& bn = *layer.batch_norm;
      lg.scale.assign(dcols, 0.0);
      lg.shift.assign(dcols, 0.0);
      dz = Matrix(n, dcols);
      const double m = static_cast<double>(n);
      for (std::size_t j = 0; j < dcols; ++j) {
        double dscale = 0.0, dshift = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          dscale += dy(i, j) * lc.normalized(i, j);
          dshift += dy(i, j);
        }
        lg.scale[j] = dscale;
        lg.shift[j] = dshift;

        const double inv = 1.0 / std::sqrt(lc.batch_var[j] + kBatchNormEpsilon);
        // dxhat = dy * gamma; backprop through batch mean and variance.
        double dvar = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dxh = dy(i, j) * bn.scale[j];
          dvar += dxh * (lc.pre_norm(i, j) - lc.batch_mean[j]);
        }
        dvar *= -0.5 * inv * inv * inv;
        double dmean = 0.0, centered_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          dmean -= dy(i, j) * bn.scale[j] * inv;
          centered_sum += lc.pre_norm(i, j) - lc.batch_mean[j];
        }
        dmean += dvar * (-2.0 / m) * centered_sum;
        for (std::size_t i = 0; i < n; ++i) {
          const double dxh = dy(i, j) * bn.scale[j];
          dz(i, j) = dxh * inv +
                     dvar * 2.0 * (lc.pre_norm(i, j) - lc.batch_mean[j]) / m +
                     dmean / m;
        }
      }
    } else {
      dz = std::move(dy);
    }

    lg.weights = matmul_transpose_a(lc.input, dz);
    lg.bias.assign(dcols, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dcols; ++j) lg.bias[j] += dz(i, j);

    dout = matmul_transpose_b(dz, layer.weights);
    grads.layers[l] = std::move(lg);
  }
  return grads;
}

std::vector<double> mlp_parameters(const MlpNetwork& net) {
  std::vector<double> out;
  for (const MlpLayer& layer : net.layers) {
    out.insert(out.end(), layer.weights.data.begin(), layer.weights.data.end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
    if (layer.batch_norm) {
      out.insert(out.end(), layer.batch_norm->scale.begin(), layer.batch_norm->scale.end());
      out.insert(out.end(), layer.batch_norm->shift.begin(), layer.batch_norm->shift.end());
    }
  }
  return out;
}

void set_mlp_parameters(MlpNetwork& net, std::span<const double> params) {
  std::size_t pos = 0;
  auto take = [&](double* dst, std::size_t count) {
    if (pos + count > params.size()) {
      throw std::invalid_argument("set_mlp_parameters: parameter vector too short");
    }
    for (std::size_t i = 0; i < count; ++i) dst[i] = params[pos + i];
    pos += count;
  };
  for (MlpLayer& layer : net.layers) {
    take(layer.weights.data.data(), layer.weights.data.size());
    take(layer.bias.data(), layer.bias.size());
    if (layer.batch_norm) {
      take(layer.batch_norm->scale.data(), layer.batch_norm->scale.size());
      take(layer.batch_norm->shift.data(), layer.batch_norm->shift.size());
    }
  }
  if (pos != params.size()) {
    throw std::invalid_argument("set_mlp_parameters: parameter vector too long");
  }
}

std::vector<double> flatten_gradients(const MlpGradients& grads) {
  std::vector<double> out;
  for (const LayerGradients& lg : grads.layers) {
    out.insert(out.end(), lg.weights.data.begin(), lg.weights.data.end());
    out.insert(out.end(), lg.bias.begin(), lg.bias.end());
    out.insert(out.end(), lg.scale.begin(), lg.scale.end());
    out.insert(out.end(), lg.shift.begin(), lg.shift.end());
  }
  return out;
}

}  // namespace survlat
