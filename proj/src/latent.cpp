#include "survlat/latent.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "survlat/artifacts.hpp"
#include "survlat/coxph.hpp"

namespace survlat {

std::vector<double> IdentityGenerator::forward(std::span<const double> z) const {
  if (z.size() != dim_) throw std::invalid_argument("IdentityGenerator: dimension mismatch");
  return {z.begin(), z.end()};
}

std::vector<double> IdentityGenerator::vjp(std::span<const double> z,
                                           std::span<const double> upstream) const {
  if (z.size() != dim_ || upstream.size() != dim_) {
    throw std::invalid_argument("IdentityGenerator: dimension mismatch");
  }
  return {upstream.begin(), upstream.end()};
}

namespace {

Matrix seeded_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

std::vector<double> apply(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols) throw std::invalid_argument("linear map: dimension mismatch");
  std::vector<double> out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = dot(m.row(i), x);
  return out;
}

std::vector<double> apply_transposed(const Matrix& m, std::span<const double> u) {
  if (u.size() != m.rows) throw std::invalid_argument("linear map: dimension mismatch");
  std::vector<double> out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double ui = u[i];
    const double* row = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += ui * row[j];
  }
  return out;
}

}  // namespace

LinearGenerator::LinearGenerator(std::size_t output_dim, std::size_t latent_dim,
                                 std::uint64_t seed)
    : matrix_(seeded_matrix(output_dim, latent_dim, seed)) {}

LinearGenerator LinearGenerator::orthonormal(std::size_t dim, std::uint64_t seed) {
  // Gram-Schmidt on a seeded Gaussian square matrix.
  Matrix m(dim, dim);
  Rng rng(seed);
  for (double& v : m.data) v = rng.normal();
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      const double proj = dot(m.row(i), m.row(k));
      for (std::size_t j = 0; j < dim; ++j) m(i, j) -= proj * m(k, j);
    }
    const double norm = std::sqrt(dot(m.row(i), m.row(i)));
    if (norm < 1e-12) throw std::runtime_error("orthonormal generator: degenerate basis");
    for (std::size_t j = 0; j < dim; ++j) m(i, j) /= norm;
  }
  return LinearGenerator(std::move(m));
}

std::vector<double> LinearGenerator::forward(std::span<const double> z) const {
  return apply(matrix_, z);
}

std::vector<double> LinearGenerator::vjp(std::span<const double> z,
                                         std::span<const double> upstream) const {
  if (z.size() != matrix_.cols) throw std::invalid_argument("LinearGenerator: dimension mismatch");
  return apply_transposed(matrix_, upstream);
}

MlpGenerator::MlpGenerator(std::size_t latent_dim, std::size_t output_dim,
                           std::uint64_t seed, std::size_t hidden_dim) {
  // Stored transposed for row-major products: w1_ is latent x hidden.
  Matrix a = seeded_matrix(hidden_dim, latent_dim, Rng::derive(seed, 1));
  w1_ = Matrix(latent_dim, hidden_dim);
  for (std::size_t i = 0; i < hidden_dim; ++i)
    for (std::size_t j = 0; j < latent_dim; ++j) w1_(j, i) = a(i, j);
  Matrix b = seeded_matrix(output_dim, hidden_dim, Rng::derive(seed, 2));
  w2_ = Matrix(hidden_dim, output_dim);
  for (std::size_t i = 0; i < output_dim; ++i)
    for (std::size_t j = 0; j < hidden_dim; ++j) w2_(j, i) = b(i, j);
  Rng rng(Rng::derive(seed, 3));
  b1_.resize(hidden_dim);
  for (double& v : b1_) v = 0.1 * rng.normal();
  b2_.resize(output_dim);
  for (double& v : b2_) v = 0.1 * rng.normal();
}

std::vector<double> MlpGenerator::forward(std::span<const double> z) const {
  if (z.size() != w1_.rows) throw std::invalid_argument("MlpGenerator: dimension mismatch");
  std::vector<double> hidden(w1_.cols, 0.0);
  for (std::size_t i = 0; i < w1_.rows; ++i) {
    const double zi = z[i];
    const double* row = w1_.data.data() + i * w1_.cols;
    for (std::size_t j = 0; j < w1_.cols; ++j) hidden[j] += zi * row[j];
  }
  for (std::size_t j = 0; j < hidden.size(); ++j) hidden[j] = std::tanh(hidden[j] + b1_[j]);
  std::vector<double> out(w2_.cols, 0.0);
  for (std::size_t i = 0; i < w2_.rows; ++i) {
    const double hi = hidden[i];
    const double* row = w2_.data.data() + i * w2_.cols;
    for (std::size_t j = 0; j < w2_.cols; ++j) out[j] += hi * row[j];
  }
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += b2_[j];
  return out;
}

std::vector<double> MlpGenerator::vjp(std::span<const double> z,
                                      std::span<const double> upstream) const {
  if (z.size() != w1_.rows || upstream.size() != w2_.cols) {
    throw std::invalid_argument("MlpGenerator: dimension mismatch");
  }
  std::vector<double> pre(w1_.cols, 0.0);
  for (std::size_t i = 0; i < w1_.rows; ++i) {
    const double zi = z[i];
    const double* row = w1_.data.data() + i * w1_.cols;
    for (std::size_t j = 0; j < w1_.cols; ++j) pre[j] += zi * row[j];
  }
  std::vector<double> dhidden(w1_.cols, 0.0);
  for (std::size_t i = 0; i < w2_.rows; ++i) {
    const double* row = w2_.data.data() + i * w2_.cols;
    double s = 0.0;
    for (std::size_t j = 0; j < w2_.cols; ++j) s += row[j] * upstream[j];
    dhidden[i] = s;
  }
  for (std::size_t j = 0; j < dhidden.size(); ++j) {
    const double t = std::tanh(pre[j] + b1_[j]);
    dhidden[j] *= 1.0 - t * t;
  }
  std::vector<double> dz(w1_.rows, 0.0);
  for (std::size_t i = 0; i < w1_.rows; ++i) {
    const double* row = w1_.data.data() + i * w1_.cols;
    double s = 0.0;
    for (std::size_t j = 0; j < w1_.cols; ++j) s += row[j] * dhidden[j];
    dz[i] = s;
  }
  return dz;
}

std::vector<double> IdentityExtractor::forward(std::span<const double> x) const {
  if (x.size() != dim_) throw std::invalid_argument("IdentityExtractor: dimension mismatch");
  return {x.begin(), x.end()};
}

std::vector<double> IdentityExtractor::vjp(std::span<const double> x,
                                           std::span<const double> upstream) const {
  if (x.size() != dim_ || upstream.size() != dim_) {
    throw std::invalid_argument("IdentityExtractor: dimension mismatch");
  }
  return {upstream.begin(), upstream.end()};
}

LinearExtractor::LinearExtractor(std::size_t output_dim, std::size_t input_dim,
                                 std::uint64_t seed)
    : matrix_(seeded_matrix(output_dim, input_dim, seed)) {}

std::vector<double> LinearExtractor::forward(std::span<const double> x) const {
  return apply(matrix_, x);
}

std::vector<double> LinearExtractor::vjp(std::span<const double> x,
                                         std::span<const double> upstream) const {
  if (x.size() != matrix_.cols) throw std::invalid_argument("LinearExtractor: dimension mismatch");
  return apply_transposed(matrix_, upstream);
}

ProjectionResult project(std::span<const double> x_real, const Generator& generator,
                         const FeatureExtractor& extractor,
                         const ProjectionConfig& config) {
  if (x_real.size() != generator.output_dim() ||
      generator.output_dim() != extractor.input_dim()) {
    throw std::invalid_argument("project: dimension mismatch");
  }
  ProjectionResult result;
  if (config.init.empty()) {
    result.z.assign(generator.latent_dim(), 0.0);
  } else {
    if (config.init.size() != generator.latent_dim()) {
      throw std::invalid_argument("project: init length mismatch");
    }
    result.z = config.init;
  }

  const std::vector<double> target = extractor.forward(x_real);
  AdamState adam(result.z.size(), config.adam);

  auto objective = [&](std::span<const double> z, std::vector<double>* grad) {
    const std::vector<double> x_syn = generator.forward(z);
    const std::vector<double> feat = extractor.forward(x_syn);
    double loss = 0.0;
    std::vector<double> dfeat(feat.size());
    for (std::size_t i = 0; i < feat.size(); ++i) {
      const double r = feat[i] - target[i];
      loss += r * r;
      dfeat[i] = 2.0 * r;
    }
    if (grad) {
      const std::vector<double> dx = extractor.vjp(x_syn, dfeat);
      *grad = generator.vjp(z, dx);
    }
    return loss;
  };

  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<double> grad;
    const double loss = objective(result.z, &grad);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("project: non-finite loss at step " + std::to_string(step));
    }
    result.loss_trace.push_back(loss);
    adam_step(adam, result.z, grad);
  }
  const double final_loss = objective(result.z, nullptr);
  if (!std::isfinite(final_loss)) {
    throw std::runtime_error("project: non-finite final loss");
  }
  result.loss_trace.push_back(final_loss);
  return result;
}

LatentVector mean_latent(const std::vector<LatentVector>& latents) {
  if (latents.empty()) throw std::invalid_argument("mean_latent: empty set");
  LatentVector mean(latents.front().size(), 0.0);
  for (const LatentVector& z : latents) {
    if (z.size() != mean.size()) throw std::invalid_argument("mean_latent: length mismatch");
    for (std::size_t i = 0; i < z.size(); ++i) mean[i] += z[i];
  }
  for (double& v : mean) v /= static_cast<double>(latents.size());
  return mean;
}

Attribute health_attribute(const Cohort& latent_cohort, double ridge_lambda) {
  CoxFitConfig config;
  config.ridge_lambda = ridge_lambda;
  const CoxModel model = fit_coxph(latent_cohort, config);
  Attribute attr;
  attr.name = "health";
  attr.direction = model.coefficients;
  attr.meta.model_type = "coxph";
  attr.meta.regularization = ridge_lambda;
  attr.meta.fit_loss = model.diagnostics.final_loss;
  return attr;
}

Attribute age_attribute(const std::vector<LatentVector>& latents,
                        std::span<const double> ages, double ridge_lambda) {
  const std::size_t n = latents.size();
  if (n != ages.size()) throw std::invalid_argument("age_attribute: count mismatch");
  if (n < 2) throw std::invalid_argument("age_attribute: need at least 2 records");
  const std::size_t d = latents.front().size();
  for (double a : ages) {
    if (!std::isfinite(a)) throw std::invalid_argument("age_attribute: non-finite age");
  }

  // Center both sides so the intercept is unpenalized and absorbed.
  std::vector<double> xbar(d, 0.0);
  double ybar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (latents[i].size() != d) throw std::invalid_argument("age_attribute: length mismatch");
    for (std::size_t j = 0; j < d; ++j) xbar[j] += latents[i][j];
    ybar += ages[i];
  }
  for (double& v : xbar) v /= static_cast<double>(n);
  ybar /= static_cast<double>(n);

  Matrix gram(d, d);
  std::vector<double> rhs(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> xc(d);
    for (std::size_t j = 0; j < d; ++j) xc[j] = latents[i][j] - xbar[j];
    const double yc = ages[i] - ybar;
    for (std::size_t j = 0; j < d; ++j) {
      rhs[j] += xc[j] * yc;
      for (std::size_t k = j; k < d; ++k) gram(j, k) += xc[j] * xc[k];
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    gram(j, j) += ridge_lambda;
    for (std::size_t k = j + 1; k < d; ++k) gram(k, j) = gram(j, k);
  }
  std::vector<double> w = solve_spd(std::move(gram), std::move(rhs));

  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = ybar;
    for (std::size_t j = 0; j < d; ++j) pred += w[j] * (latents[i][j] - xbar[j]);
    const double r = pred - ages[i];
    sse += r * r;
  }

  Attribute attr;
  attr.name = "age";
  attr.direction = std::move(w);
  attr.meta.model_type = "ridge_regression";
  attr.meta.regularization = ridge_lambda;
  attr.meta.fit_loss = sse / static_cast<double>(n);
  return attr;
}

Attribute single_dim_attribute(std::size_t dim, std::size_t latent_dim) {
  if (dim >= latent_dim) {
    throw std::invalid_argument("single_dim_attribute: dim out of range");
  }
  Attribute attr;
  attr.name = "single_dim";
  attr.direction.assign(latent_dim, 0.0);
  attr.direction[dim] = 1.0;
  attr.meta.model_type = "unit_basis";
  attr.meta.dim = static_cast<int>(dim);
  return attr;
}

LatentVector manipulate(const LatentVector& z, const Attribute& attribute, double beta) {
  if (z.size() != attribute.direction.size()) {
    throw std::invalid_argument("manipulate: length mismatch");
  }
  LatentVector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] + beta * attribute.direction[i];
  return out;
}

std::vector<std::pair<double, std::vector<double>>> manipulation_sweep(
    const LatentVector& z, const Attribute& attribute,
    std::span<const double> betas, const Generator& generator) {
  std::vector<std::pair<double, std::vector<double>>> out;
  for (double beta : betas) {
    if (!std::isfinite(beta)) throw std::invalid_argument("manipulation_sweep: non-finite beta");
    out.emplace_back(beta, generator.forward(manipulate(z, attribute, beta)));
  }
  return out;
}

void save_latents_jsonl(const std::vector<std::pair<std::string, LatentVector>>& latents,
                        const std::string& path) {
  std::string out;
  for (const auto& [id, z] : latents) {
    nlohmann::json j;
    j["id"] = id;
    j["z"] = z;
    out += j.dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

std::vector<std::pair<std::string, LatentVector>> load_latents_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open latent file: " + path);
  std::vector<std::pair<std::string, LatentVector>> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw std::runtime_error(path + " line " + std::to_string(row) + ": invalid JSON");
    }
    out.emplace_back(j.at("id").get<std::string>(), j.at("z").get<std::vector<double>>());
  }
  return out;
}

void save_attribute(const Attribute& attribute, const std::string& path) {
  nlohmann::json j;
  j["name"] = attribute.name;
  j["direction"] = attribute.direction;
  nlohmann::json meta;
  meta["model_type"] = attribute.meta.model_type;
  meta["regularization"] = attribute.meta.regularization;
  meta["fit_loss"] = attribute.meta.fit_loss;
  if (attribute.meta.dim >= 0) meta["dim"] = attribute.meta.dim;
  j["metadata"] = meta;
  atomic_write_file(path, j.dump(2) + "\n");
}

Attribute load_attribute(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(read_file(path));
  Attribute attr;
  attr.name = j.at("name").get<std::string>();
  attr.direction = j.at("direction").get<std::vector<double>>();
  const auto& meta = j.at("metadata");
  attr.meta.model_type = meta.at("model_type").get<std::string>();
  attr.meta.regularization = meta.at("regularization").get<double>();
  attr.meta.fit_loss = meta.at("fit_loss").get<double>();
  if (meta.contains("dim")) attr.meta.dim = meta.at("dim").get<int>();
  return attr;
}

std::string render_pgm(std::span<const double> image) {
  if (image.empty()) throw std::invalid_argument("render_pgm: empty image");
  std::size_t side = 1;
  while (side * side < image.size()) ++side;

  double lo = image[0], hi = image[0];
  for (double v : image) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;

  std::ostringstream out;
  out << "P2\n" << side << " " << side << "\n255\n";
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const std::size_t i = r * side + c;
      int gray = 0;
      if (i < image.size() && span > 0.0) {
        gray = static_cast<int>(std::llround(255.0 * (image[i] - lo) / span));
      }
      out << gray << (c + 1 == side ? "" : " ");
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace survlat
