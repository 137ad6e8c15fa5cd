#include "adap/dense_net.hpp"

namespace adap {

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "identity";
}

Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::tanh: return tanh(x);
    case Activation::relu: return relu(x);
  }
  return x;
}

Var net_forward(Tape& tape, const DenseNetd& net, Var input) {
  if (net.empty()) throw ConfigError("net_forward: empty network");
  if (input.rows() != net.input_size()) {
    throw ConfigError("net_forward: input size " + std::to_string(input.rows()) + " != " +
                      std::to_string(net.input_size()));
  }
  Var x = input;
  for (const auto& l : net.layers()) {
    x = add_bias(matmul(tape.parameter(l.weight), x), tape.parameter(l.bias));
    x = activate(x, l.activation);
  }
  return x;
}

}  // namespace adap
