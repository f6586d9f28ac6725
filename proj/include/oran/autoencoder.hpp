#pragma once

// Hourglass autoencoder [D, H, ..., L, ..., H, D]: tanh on every hidden layer
// (the latent included), identity on the output. Samples are columns.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace oran {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws std::invalid_argument unless `sizes` is a mirror-shaped hourglass
/// strictly narrowing towards the middle.
inline void validate_hourglass(const std::vector<int>& sizes) {
  if (sizes.size() < 3 || sizes.size() % 2 == 0) {
    throw std::invalid_argument("hourglass needs an odd number (>= 3) of layer sizes");
  }
  const std::size_t mid = sizes.size() / 2;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] <= 0) throw std::invalid_argument("layer sizes must be positive");
    if (sizes[i] != sizes[sizes.size() - 1 - i]) {
      throw std::invalid_argument("encoder and decoder must mirror each other");
    }
    if (i < mid && sizes[i + 1] >= sizes[i]) {
      throw std::invalid_argument("encoder layers must strictly narrow towards the latent");
    }
  }
}

template <typename Scalar>
struct Autoencoder {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<int> sizes;
  std::vector<Matrix> weights;  // weights[k] is sizes[k+1] x sizes[k]
  std::vector<Vector> biases;

  int input_dim() const { return sizes.front(); }
  int latent_dim() const { return sizes[sizes.size() / 2]; }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t latent_layer() const { return sizes.size() / 2; }

  /// Zero weights and biases.
  static Autoencoder zeros(const std::vector<int>& sizes) {
    validate_hourglass(sizes);
    Autoencoder ae;
    ae.sizes = sizes;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
      ae.weights.push_back(Matrix::Zero(sizes[k + 1], sizes[k]));
      ae.biases.push_back(Vector::Zero(sizes[k + 1]));
    }
    return ae;
  }

  /// Glorot-uniform weights, zero biases.
  static Autoencoder random(const std::vector<int>& sizes, std::uint64_t seed) {
    auto ae = zeros(sizes);
    std::mt19937_64 rng(seed);
    for (auto& w : ae.weights) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<Scalar>(u(rng));
      }
    }
    return ae;
  }

  friend bool operator==(const Autoencoder& a, const Autoencoder& b) {
    if (a.sizes != b.sizes) return false;
    for (std::size_t k = 0; k < a.weights.size(); ++k) {
      if (a.weights[k] != b.weights[k] || a.biases[k] != b.biases[k]) return false;
    }
    return true;
  }
};

using AutoencoderD = Autoencoder<double>;

/// Activations of every layer for a batch; acts[0] is the input.
template <typename Scalar>
std::vector<typename Autoencoder<Scalar>::Matrix> forward_all(
    const Autoencoder<Scalar>& ae, const typename Autoencoder<Scalar>::Matrix& x) {
  if (x.rows() != ae.input_dim()) {
    throw std::invalid_argument("input dimension " + std::to_string(x.rows()) + " != " +
                                std::to_string(ae.input_dim()));
  }
  std::vector<typename Autoencoder<Scalar>::Matrix> acts;
  acts.reserve(ae.num_layers() + 1);
  acts.push_back(x);
  for (std::size_t k = 0; k < ae.num_layers(); ++k) {
    typename Autoencoder<Scalar>::Matrix z = (ae.weights[k] * acts.back()).colwise() + ae.biases[k];
    if (k + 1 < ae.num_layers()) z = z.array().tanh().matrix();
    acts.push_back(std::move(z));
  }
  return acts;
}

template <typename Scalar>
struct AeOutput {
  typename Autoencoder<Scalar>::Vector latent;
  typename Autoencoder<Scalar>::Vector recon;
};

template <typename Scalar>
AeOutput<Scalar> ae_forward(const Autoencoder<Scalar>& ae,
                            const typename Autoencoder<Scalar>::Vector& x) {
  auto acts = forward_all(ae, typename Autoencoder<Scalar>::Matrix(x));
  return {acts[ae.latent_layer()].col(0), acts.back().col(0)};
}

/// Mean squared reconstruction error over all entries of the batch.
template <typename Scalar>
Scalar reconstruction_mse(const Autoencoder<Scalar>& ae,
                          const typename Autoencoder<Scalar>::Matrix& x) {
  if (x.cols() == 0) return Scalar(0);
  auto acts = forward_all(ae, x);
  return (acts.back() - x).squaredNorm() / static_cast<Scalar>(x.size());
}

template <typename Scalar>
struct AeGradients {
  std::vector<typename Autoencoder<Scalar>::Matrix> weights;
  std::vector<typename Autoencoder<Scalar>::Vector> biases;
};

/// Backpropagation of reconstruction_mse. Returns the loss.
template <typename Scalar>
Scalar mse_gradient(const Autoencoder<Scalar>& ae, const typename Autoencoder<Scalar>::Matrix& x,
                    AeGradients<Scalar>& grad) {
  using Matrix = typename Autoencoder<Scalar>::Matrix;
  auto acts = forward_all(ae, x);
  const Scalar n = static_cast<Scalar>(x.size());
  Matrix delta = (acts.back() - x) * (Scalar(2) / n);
  const Scalar loss = (acts.back() - x).squaredNorm() / n;

  const std::size_t layers = ae.num_layers();
  grad.weights.resize(layers);
  grad.biases.resize(layers);
  for (std::size_t k = layers; k-- > 0;) {
    grad.weights[k] = delta * acts[k].transpose();
    grad.biases[k] = delta.rowwise().sum();
    if (k > 0) {
      // acts[k] = tanh(z), tanh' = 1 - tanh^2
      delta = ((ae.weights[k].transpose() * delta).array() * (Scalar(1) - acts[k].array().square()))
                  .matrix();
    }
  }
  return loss;
}

struct AeTrainOptions {
  int epochs{200};
  double learning_rate{0.1};
  int batch_size{32};
  std::uint64_t seed{1};
};

template <typename Scalar>
struct AeTrainResult {
  Autoencoder<Scalar> model;
  Scalar final_mse{0};
};

/// Mini-batch gradient descent on reconstruction MSE. Deterministic given
/// the seed. Throws TrainingError if the loss stops being finite.
template <typename Scalar>
AeTrainResult<Scalar> ae_train(const typename Autoencoder<Scalar>::Matrix& data,
                               const std::vector<int>& sizes, const AeTrainOptions& opt) {
  using Matrix = typename Autoencoder<Scalar>::Matrix;
  if (data.cols() == 0) throw std::invalid_argument("ae_train: empty dataset");
  if (opt.batch_size <= 0 || opt.epochs < 0) throw std::invalid_argument("ae_train: bad options");
  auto model = Autoencoder<Scalar>::random(sizes, opt.seed);
  if (data.rows() != model.input_dim()) throw std::invalid_argument("ae_train: dimension mismatch");

  std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  AeGradients<Scalar> grad;
  const Scalar lr = static_cast<Scalar>(opt.learning_rate);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      Matrix batch(data.rows(), static_cast<Eigen::Index>(end - start));
      for (std::size_t j = start; j < end; ++j) {
        batch.col(static_cast<Eigen::Index>(j - start)) = data.col(order[j]);
      }
      const Scalar loss = mse_gradient(model, batch, grad);
      if (!std::isfinite(static_cast<double>(loss))) {
        throw TrainingError("autoencoder training diverged at epoch " + std::to_string(epoch) +
                            " (loss not finite); lower the learning rate");
      }
      for (std::size_t k = 0; k < model.num_layers(); ++k) {
        model.weights[k] -= lr * grad.weights[k];
        model.biases[k] -= lr * grad.biases[k];
      }
    }
  }
  const Scalar mse = reconstruction_mse(model, data);
  if (!std::isfinite(static_cast<double>(mse))) {
    throw TrainingError("autoencoder training diverged (final loss not finite)");
  }
  return {std::move(model), mse};
}

}  // namespace oran
