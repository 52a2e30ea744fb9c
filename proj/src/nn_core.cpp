#include "kcrec/nn_core.hpp"

#include <cmath>

#include "kcrec/error.hpp"

namespace kcrec {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::relu, Activation::tanh, Activation::linear}) {
    if (activation_name(a) == name) return a;
  }
  throw Error("unknown activation '" + std::string(name) + "'");
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error("network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weight.rows()) throw Error("bias length does not match layer output");
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows()) throw Error("adjacent layer dimensions disagree");
    if (!l.weight.allFinite() || !l.bias.allFinite()) throw Error("network parameters must be finite");
  }
}

Mlp::Mlp(std::span<const std::size_t> dims, std::span<const Activation> activations, Rng& rng) {
  if (dims.size() < 2) throw Error("network needs input and output dimensions");
  if (activations.size() != dims.size() - 1) throw Error("need one activation per layer");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(dims[i]);
    const auto out = static_cast<Eigen::Index>(dims[i + 1]);
    if (in < 1 || out < 1) throw Error("layer dimensions must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> init(-bound, bound);
    DenseLayer l;
    l.weight.resize(out, in);
    l.bias.resize(out);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = init(rng);
    }
    for (Eigen::Index r = 0; r < out; ++r) l.bias(r) = init(rng);
    l.activation = activations[i];
    layers_.push_back(std::move(l));
  }
}

std::size_t Mlp::input_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t Mlp::output_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool Mlp::same_architecture(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& a = layers_[i];
    const auto& b = other.layers_[i];
    if (a.activation != b.activation || a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) {
      return false;
    }
  }
  return true;
}

namespace {

void apply_activation(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
    case Activation::linear: break;
  }
}

// Multiplies the incoming gradient by the activation derivative at `pre`.
void activation_backward(Activation a, const Eigen::MatrixXd& pre, Eigen::MatrixXd& grad) {
  switch (a) {
    case Activation::relu: grad = (pre.array() > 0.0).select(grad, 0.0); break;
    case Activation::tanh: grad = (grad.array() * (1.0 - pre.array().tanh().square())).matrix(); break;
    case Activation::linear: break;
  }
}

void check_input(const Mlp& net, const Eigen::MatrixXd& x) {
  if (net.layers().empty()) throw Error("forward through an empty network");
  if (static_cast<std::size_t>(x.rows()) != net.input_dim()) {
    throw Error("input dimension " + std::to_string(x.rows()) + " does not match network input " +
                std::to_string(net.input_dim()));
  }
}

}  // namespace

ForwardPass forward(const Mlp& net, const Eigen::MatrixXd& x) {
  check_input(net, x);
  ForwardPass pass;
  Eigen::MatrixXd h = x;
  for (const auto& l : net.layers()) {
    pass.cache.inputs.push_back(h);
    Eigen::MatrixXd z = l.weight * h;
    z.colwise() += l.bias;
    pass.cache.pre.push_back(z);
    apply_activation(l.activation, z);
    h = std::move(z);
  }
  pass.output = std::move(h);
  return pass;
}

Eigen::MatrixXd predict(const Mlp& net, const Eigen::MatrixXd& x) {
  check_input(net, x);
  Eigen::MatrixXd h = x;
  for (const auto& l : net.layers()) {
    Eigen::MatrixXd z = l.weight * h;
    z.colwise() += l.bias;
    apply_activation(l.activation, z);
    h = std::move(z);
  }
  return h;
}

std::vector<double> predict(const Mlp& net, std::span<const double> x) {
  Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::MatrixXd out = predict(net, in);
  return std::vector<double>(out.data(), out.data() + out.size());
}

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (const auto& l : net.layers()) {
    g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

BackwardPass backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& grad_y) {
  const auto& layers = net.layers();
  if (cache.inputs.size() != layers.size() || cache.pre.size() != layers.size()) {
    throw Error("forward cache does not match the network");
  }
  const auto& last = cache.pre.back();
  if (grad_y.rows() != last.rows() || grad_y.cols() != last.cols()) {
    throw Error("output gradient shape does not match the forward pass");
  }
  BackwardPass out;
  out.params.weight.resize(layers.size());
  out.params.bias.resize(layers.size());
  Eigen::MatrixXd grad = grad_y;
  for (std::size_t i = layers.size(); i-- > 0;) {
    activation_backward(layers[i].activation, cache.pre[i], grad);
    out.params.weight[i].noalias() = grad * cache.inputs[i].transpose();
    out.params.bias[i] = grad.rowwise().sum();
    Eigen::MatrixXd next = layers[i].weight.transpose() * grad;
    grad = std::move(next);
  }
  out.grad_input = std::move(grad);
  return out;
}

Adam::Adam(const Mlp& net, AdamConfig config)
    : config_(config), m_(Gradients::zeros_like(net)), v_(Gradients::zeros_like(net)) {
  if (!(config_.learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) || !(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
    throw Error("Adam betas must lie in [0, 1)");
  }
  if (!(config_.epsilon > 0.0)) throw Error("Adam epsilon must be positive");
}

void Adam::step(Mlp& net, const Gradients& grads) {
  auto& layers = net.layers();
  if (grads.weight.size() != layers.size() || m_.weight.size() != layers.size()) {
    throw Error("gradient shapes do not match the network");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (grads.weight[i].rows() != layers[i].weight.rows() || grads.weight[i].cols() != layers[i].weight.cols() ||
        grads.bias[i].size() != layers[i].bias.size()) {
      throw Error("gradient shapes do not match the network");
    }
    if (!grads.weight[i].allFinite() || !grads.bias[i].allFinite()) throw Error("diverged");
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate, eps = config_.epsilon;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weight, m_.weight[i], v_.weight[i], grads.weight[i]);
    update(layers[i].bias, m_.bias[i], v_.bias[i], grads.bias[i]);
  }
}

bool Adam::operator==(const Adam& o) const {
  if (t_ != o.t_ || m_.weight.size() != o.m_.weight.size()) return false;
  if (config_.learning_rate != o.config_.learning_rate || config_.beta1 != o.config_.beta1 ||
      config_.beta2 != o.config_.beta2 || config_.epsilon != o.config_.epsilon) {
    return false;
  }
  for (std::size_t i = 0; i < m_.weight.size(); ++i) {
    if (m_.weight[i] != o.m_.weight[i] || v_.weight[i] != o.v_.weight[i] || m_.bias[i] != o.m_.bias[i] ||
        v_.bias[i] != o.v_.bias[i]) {
      return false;
    }
  }
  return true;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return flat;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  const auto flat = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw Error("parameter array has the wrong length");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

nlohmann::json gradients_to_json(const Gradients& g) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < g.weight.size(); ++i) {
    layers.push_back({{"weight", matrix_to_json(g.weight[i])}, {"bias", matrix_to_json(g.bias[i])}});
  }
  return layers;
}

Gradients gradients_from_json(const nlohmann::json& j, const Gradients& shape) {
  if (j.size() != shape.weight.size()) throw Error("optimizer state has the wrong layer count");
  Gradients g;
  for (std::size_t i = 0; i < shape.weight.size(); ++i) {
    g.weight.push_back(matrix_from_json(j[i].at("weight"), shape.weight[i].rows(), shape.weight[i].cols()));
    g.bias.push_back(matrix_from_json(j[i].at("bias"), shape.bias[i].size(), 1));
  }
  return g;
}

}  // namespace

nlohmann::json Adam::to_json() const {
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& w : m_.weight) shapes.push_back({w.rows(), w.cols()});
  return {{"learning_rate", config_.learning_rate},
          {"beta1", config_.beta1},
          {"beta2", config_.beta2},
          {"epsilon", config_.epsilon},
          {"step", t_},
          {"shapes", shapes},
          {"m", gradients_to_json(m_)},
          {"v", gradients_to_json(v_)}};
}

Adam Adam::from_json(const nlohmann::json& j) {
  Adam a;
  a.config_ = {j.at("learning_rate").get<double>(), j.at("beta1").get<double>(), j.at("beta2").get<double>(),
               j.at("epsilon").get<double>()};
  a.t_ = j.at("step").get<std::uint64_t>();
  Gradients shape;
  for (const auto& s : j.at("shapes")) {
    const auto rows = s.at(0).get<Eigen::Index>();
    const auto cols = s.at(1).get<Eigen::Index>();
    shape.weight.push_back(Eigen::MatrixXd::Zero(rows, cols));
    shape.bias.push_back(Eigen::VectorXd::Zero(rows));
  }
  a.m_ = gradients_from_json(j.at("m"), shape);
  a.v_ = gradients_from_json(j.at("v"), shape);
  return a;
}

void clone_into(const Mlp& src, Mlp& dst) {
  if (!src.same_architecture(dst)) throw Error("cannot sync networks with different architectures");
  for (std::size_t i = 0; i < src.layers().size(); ++i) {
    dst.layers()[i].weight = src.layers()[i].weight;
    dst.layers()[i].bias = src.layers()[i].bias;
  }
}

nlohmann::json to_json(const Mlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"activation", activation_name(l.activation)},
                      {"in", l.weight.cols()},
                      {"out", l.weight.rows()},
                      {"weight", matrix_to_json(l.weight)},
                      {"bias", matrix_to_json(l.bias)}});
  }
  return {{"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  std::vector<DenseLayer> layers;
  for (const auto& l : j.at("layers")) {
    const auto in = l.at("in").get<Eigen::Index>();
    const auto out = l.at("out").get<Eigen::Index>();
    DenseLayer d;
    d.activation = parse_activation(l.at("activation").get<std::string>());
    d.weight = matrix_from_json(l.at("weight"), out, in);
    d.bias = matrix_from_json(l.at("bias"), out, 1);
    layers.push_back(std::move(d));
  }
  return Mlp(std::move(layers));
}

}  // namespace kcrec
