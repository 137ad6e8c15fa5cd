#pragma once

#include "adap/errors.hpp"
#include "adap/random.hpp"
#include "adap/tape.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adap {

enum class Activation { identity, tanh, relu };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

template <typename Scalar>
struct DenseLayer {
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  MatrixType weight;  // out x in
  MatrixType bias;    // out x 1
  Activation activation = Activation::identity;
};

template <typename Scalar, typename Derived>
void apply_activation(Activation a, Eigen::MatrixBase<Derived>& x) {
  switch (a) {
    case Activation::identity:
      break;
    case Activation::tanh:
      x.derived() = x.array().tanh().matrix();
      break;
    case Activation::relu:
      x.derived() = x.cwiseMax(Scalar(0));
      break;
  }
}

// Multilayer perceptron stored as an ordered list of affine layers.
template <typename Scalar>
class DenseNet {
 public:
  using LayerType = DenseLayer<Scalar>;
  using MatrixType = typename LayerType::MatrixType;

  DenseNet() = default;

  explicit DenseNet(std::vector<LayerType> layers) : layers_(std::move(layers)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.rows() != l.weight.rows() || l.bias.cols() != 1) {
        throw ConfigError("DenseNet: bias shape of layer " + std::to_string(i) + " does not match weight");
      }
      if (i > 0 && layers_[i - 1].weight.rows() != l.weight.cols()) {
        throw ConfigError("DenseNet: layer " + std::to_string(i) + " input " + std::to_string(l.weight.cols()) +
                          " != previous output " + std::to_string(layers_[i - 1].weight.rows()));
      }
    }
  }

  // Layer sizes {in, h1, ..., out}; hidden layers use `hidden`, the last layer
  // `output`. Rows are normalized to `hidden_scale` / `output_scale`.
  static DenseNet random(std::span<const int> sizes, Activation hidden, Activation output, Rng& rng,
                         Scalar hidden_scale = Scalar(1), Scalar output_scale = Scalar(1)) {
    if (sizes.size() < 2) throw ConfigError("DenseNet: need at least input and output sizes");
    std::vector<LayerType> layers;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const bool last = i + 2 == sizes.size();
      LayerType l;
      l.weight = normc(sizes[i + 1], sizes[i], last ? output_scale : hidden_scale, rng);
      l.bias = MatrixType::Zero(sizes[i + 1], 1);
      l.activation = last ? output : hidden;
      layers.push_back(std::move(l));
    }
    return DenseNet(std::move(layers));
  }

  // Gaussian rows rescaled to a fixed norm.
  static MatrixType normc(int rows, int cols, Scalar scale, Rng& rng) {
    MatrixType w(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) w(r, c) = static_cast<Scalar>(standard_normal(rng));
      const Scalar norm = w.row(r).norm();
      if (norm > Scalar(0)) w.row(r) *= scale / norm;
    }
    return w;
  }

  const std::vector<LayerType>& layers() const { return layers_; }
  std::vector<LayerType>& layers() { return layers_; }
  bool empty() const { return layers_.empty(); }
  Eigen::Index input_size() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
  Eigen::Index output_size() const { return layers_.empty() ? 0 : layers_.back().weight.rows(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  template <typename F>
  void for_each_parameter(F&& f) {
    for (auto& l : layers_) {
      f(l.weight);
      f(l.bias);
    }
  }
  template <typename F>
  void for_each_parameter(F&& f) const {
    for (const auto& l : layers_) {
      f(l.weight);
      f(l.bias);
    }
  }

 private:
  std::vector<LayerType> layers_;
};

using DenseNetd = DenseNet<double>;

// Batched forward pass; input is in_size x batch.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> net_forward(const DenseNet<Scalar>& net,
                                                                const Eigen::MatrixBase<Derived>& input) {
  if (net.empty()) throw ConfigError("net_forward: empty network");
  if (input.rows() != net.input_size()) {
    throw ConfigError("net_forward: input size " + std::to_string(input.rows()) + " != " +
                      std::to_string(net.input_size()));
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x = input;
  for (const auto& l : net.layers()) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> y = l.weight * x;
    y.colwise() += l.bias.col(0);
    apply_activation<Scalar>(l.activation, y);
    x = std::move(y);
  }
  return x;
}

Var activate(Var x, Activation a);

// Recorded forward pass; parameters are bound to the tape by address.
Var net_forward(Tape& tape, const DenseNetd& net, Var input);

}  // namespace adap
