#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kcrec/learner_model.hpp"

namespace kcrec {

enum class Activation { relu, tanh, linear };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::linear;

  bool operator==(const DenseLayer& o) const {
    return activation == o.activation && weight == o.weight && bias == o.bias;
  }
};

/// Dense feed-forward network in float64. Inputs are column vectors; a batch
/// is a matrix with one column per sample.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);
  /// Layer sizes dims[0] -> dims[1] -> ... with one activation per layer.
  /// Weights and biases are uniform in +-1/sqrt(fan_in).
  Mlp(std::span<const std::size_t> dims, std::span<const Activation> activations, Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  bool same_architecture(const Mlp& other) const;
  bool operator==(const Mlp& other) const { return layers_ == other.layers_; }

 private:
  std::vector<DenseLayer> layers_;
};

struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
};

struct ForwardPass {
  Eigen::MatrixXd output;
  ForwardCache cache;
};

/// Batched forward pass. Throws on input dimension mismatch.
ForwardPass forward(const Mlp& net, const Eigen::MatrixXd& x);
/// Forward without keeping the cache.
Eigen::MatrixXd predict(const Mlp& net, const Eigen::MatrixXd& x);
std::vector<double> predict(const Mlp& net, std::span<const double> x);

struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  static Gradients zeros_like(const Mlp& net);
};

struct BackwardPass {
  Gradients params;
  Eigen::MatrixXd grad_input;
};

/// Reverse-mode gradients of sum(y .* grad_y) over the batch.
BackwardPass backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& grad_y);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

/// Adam with bias correction; moments mirror the network's parameter shapes.
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, AdamConfig config);

  /// Applies one update. Throws "diverged" on a non-finite gradient.
  void step(Mlp& net, const Gradients& grads);

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return t_; }

  nlohmann::json to_json() const;
  static Adam from_json(const nlohmann::json& j);

  bool operator==(const Adam& o) const;

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  Gradients m_;
  Gradients v_;
};

/// Copies src parameters into dst. Throws if the architectures differ.
void clone_into(const Mlp& src, Mlp& dst);

/// {"layers": [{"activation", "in", "out", "weight" (row-major), "bias"}]}
nlohmann::json to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

}  // namespace kcrec
