#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "survlat/cohort.hpp"
#include "survlat/numerics.hpp"

namespace survlat {

using LatentVector = std::vector<double>;

// Differentiable map from latent space to observation space. vjp must be
// consistent with forward (checked against finite differences).
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::size_t latent_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual std::vector<double> forward(std::span<const double> z) const = 0;
  virtual std::vector<double> vjp(std::span<const double> z,
                                  std::span<const double> upstream) const = 0;
};

class IdentityGenerator final : public Generator {
 public:
  explicit IdentityGenerator(std::size_t dim) : dim_(dim) {}
  std::size_t latent_dim() const override { return dim_; }
  std::size_t output_dim() const override { return dim_; }
  std::vector<double> forward(std::span<const double> z) const override;
  std::vector<double> vjp(std::span<const double> z,
                          std::span<const double> upstream) const override;

 private:
  std::size_t dim_;
};

// x = A z with a fixed seeded A.
class LinearGenerator final : public Generator {
 public:
  LinearGenerator(std::size_t output_dim, std::size_t latent_dim, std::uint64_t seed);
  static LinearGenerator orthonormal(std::size_t dim, std::uint64_t seed);

  std::size_t latent_dim() const override { return matrix_.cols; }
  std::size_t output_dim() const override { return matrix_.rows; }
  std::vector<double> forward(std::span<const double> z) const override;
  std::vector<double> vjp(std::span<const double> z,
                          std::span<const double> upstream) const override;
  const Matrix& matrix() const { return matrix_; }

 private:
  explicit LinearGenerator(Matrix m) : matrix_(std::move(m)) {}
  Matrix matrix_;
};

// One tanh hidden layer with fixed seeded weights; smooth and nonlinear.
class MlpGenerator final : public Generator {
 public:
  MlpGenerator(std::size_t latent_dim, std::size_t output_dim, std::uint64_t seed,
               std::size_t hidden_dim = 32);
  std::size_t latent_dim() const override { return w1_.rows; }
  std::size_t output_dim() const override { return w2_.cols; }
  std::vector<double> forward(std::span<const double> z) const override;
  std::vector<double> vjp(std::span<const double> z,
                          std::span<const double> upstream) const override;

 private:
  Matrix w1_, w2_;
  std::vector<double> b1_, b2_;
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual std::vector<double> forward(std::span<const double> x) const = 0;
  virtual std::vector<double> vjp(std::span<const double> x,
                                  std::span<const double> upstream) const = 0;
};

class IdentityExtractor final : public FeatureExtractor {
 public:
  explicit IdentityExtractor(std::size_t dim) : dim_(dim) {}
  std::size_t input_dim() const override { return dim_; }
  std::size_t output_dim() const override { return dim_; }
  std::vector<double> forward(std::span<const double> x) const override;
  std::vector<double> vjp(std::span<const double> x,
                          std::span<const double> upstream) const override;

 private:
  std::size_t dim_;
};

class LinearExtractor final : public FeatureExtractor {
 public:
  LinearExtractor(std::size_t output_dim, std::size_t input_dim, std::uint64_t seed);
  std::size_t input_dim() const override { return matrix_.cols; }
  std::size_t output_dim() const override { return matrix_.rows; }
  std::vector<double> forward(std::span<const double> x) const override;
  std::vector<double> vjp(std::span<const double> x,
                          std::span<const double> upstream) const override;

 private:
  Matrix matrix_;
};

struct AttributeMeta {
  std::string model_type;
  double regularization = 0.0;
  double fit_loss = 0.0;
  int dim = -1;  // single-dimension attributes only
};

struct Attribute {
  std::string name;  // health | age | single_dim
  std::vector<double> direction;
  AttributeMeta meta;
};

struct ProjectionConfig {
  std::size_t steps = 800;
  AdamHyper adam = kProjectionAdam;
  // Empty init means the mean latent; for the toy standard-normal prior
  // that is the zero vector.
  std::vector<double> init;
};

struct ProjectionResult {
  LatentVector z;
  std::vector<double> loss_trace;  // per step, plus the final value
};

// Minimizes ||phi(x_real) - phi(G(z))||^2 by Adam (Eq. of the embedding
// objective); returns the final latent and the loss trace.
ProjectionResult project(std::span<const double> x_real, const Generator& generator,
                         const FeatureExtractor& extractor,
                         const ProjectionConfig& config);

LatentVector mean_latent(const std::vector<LatentVector>& latents);

// CoxPH fit (ridge 1e-4) on a cohort whose features are latent vectors;
// the coefficient vector is the health direction.
Attribute health_attribute(const Cohort& latent_cohort, double ridge_lambda = 1e-4);

// Ridge least squares (lambda 1e-3, unpenalized intercept); the slope
// coefficients are the age direction.
Attribute age_attribute(const std::vector<LatentVector>& latents,
                        std::span<const double> ages, double ridge_lambda = 1e-3);

Attribute single_dim_attribute(std::size_t dim, std::size_t latent_dim);

// z + beta * w.
LatentVector manipulate(const LatentVector& z, const Attribute& attribute, double beta);

std::vector<std::pair<double, std::vector<double>>> manipulation_sweep(
    const LatentVector& z, const Attribute& attribute,
    std::span<const double> betas, const Generator& generator);

// One JSON record per line: {"id": ..., "z": [...]}.
void save_latents_jsonl(const std::vector<std::pair<std::string, LatentVector>>& latents,
                        const std::string& path);
std::vector<std::pair<std::string, LatentVector>> load_latents_jsonl(const std::string& path);

void save_attribute(const Attribute& attribute, const std::string& path);
Attribute load_attribute(const std::string& path);

// Plain PGM (P2), row-major square reshape with per-image min-max scaling;
// tails shorter than the square are padded black.
std::string render_pgm(std::span<const double> image);

}  // namespace survlat
