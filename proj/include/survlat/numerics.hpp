#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace survlat {

// Counter-based deterministic generator: each draw hashes seed + Weyl counter
// (splitmix64 finalizer), so identical seed and call sequence reproduce the
// same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  std::uint64_t next_below(std::uint64_t n);  // [0, n)
  double uniform();                           // [0, 1)
  double uniform(double lo, double hi);
  double normal();                            // Box-Muller, two draws per call

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  // Derives an independent sub-stream seed for a tagged purpose.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag);

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

struct AdamHyper {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Paper schedules: lr 0.01 for latent projection, lr 0.001 for model training.
inline constexpr AdamHyper kProjectionAdam{0.01, 0.9, 0.999, 1e-8};
inline constexpr AdamHyper kTrainingAdam{0.001, 0.9, 0.999, 1e-8};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  AdamHyper hyper;

  AdamState(std::size_t n, AdamHyper hy)
      : first_moment(n, 0.0), second_moment(n, 0.0), hyper(hy) {}
};

// Bias-corrected Adam update, in place. Throws on non-finite gradient,
// naming the offending index.
void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads);

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double h = 1e-5);

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

Matrix matmul(const Matrix& a, const Matrix& b);              // a b
Matrix matmul_transpose_a(const Matrix& a, const Matrix& b);  // a^T b
Matrix matmul_transpose_b(const Matrix& a, const Matrix& b);  // a b^T

// Solves a x = b for symmetric positive-definite a (Cholesky, in place).
std::vector<double> solve_spd(Matrix a, std::vector<double> b);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace survlat
