#include "adap/tape.hpp"

#include "adap/errors.hpp"

#include <cmath>
#include <string>

namespace adap {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("tape: dimension mismatch in ") + what);
}

Matrix column_softmax(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mx = x.col(j).maxCoeff();
    y.col(j) = (x.col(j).array() - mx).exp().matrix();
    y.col(j) /= y.col(j).sum();
  }
  return y;
}

}  // namespace

const Matrix& Var::value() const { return tape->value(id); }

const Matrix& Tape::value(int id) const { return val(id); }

const Matrix& Tape::val(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external != nullptr ? *n.external : n.value;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(const Matrix& value) {
  if (auto it = bound_.find(&value); it != bound_.end()) return Var{this, it->second};
  Node n;
  n.op = Op::parameter;
  n.external = &value;
  n.requires_grad = true;
  Var v = push(std::move(n));
  bound_.emplace(&value, v.id);
  return v;
}

Var Tape::matmul(Var a, Var b) {
  require(val(a.id).cols() == val(b.id).rows(), "matmul");
  Node n;
  n.op = Op::matmul;
  n.a = a.id;
  n.b = b.id;
  n.value.noalias() = val(a.id) * val(b.id);
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require(val(a.id).rows() == val(b.id).rows() && val(a.id).cols() == val(b.id).cols(), "add");
  Node n;
  n.op = Op::add;
  n.a = a.id;
  n.b = b.id;
  n.value = val(a.id) + val(b.id);
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  require(val(a.id).rows() == val(b.id).rows() && val(a.id).cols() == val(b.id).cols(), "sub");
  Node n;
  n.op = Op::sub;
  n.a = a.id;
  n.b = b.id;
  n.value = val(a.id) - val(b.id);
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  require(val(a.id).rows() == val(b.id).rows() && val(a.id).cols() == val(b.id).cols(), "hadamard");
  Node n;
  n.op = Op::hadamard;
  n.a = a.id;
  n.b = b.id;
  n.value = val(a.id).cwiseProduct(val(b.id));
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::scale;
  n.a = a.id;
  n.s0 = s;
  n.value = val(a.id) * s;
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double s) {
  Node n;
  n.op = Op::add_scalar;
  n.a = a.id;
  n.value = val(a.id).array() + s;
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::add_bias(Var x, Var bias) {
  require(val(bias.id).cols() == 1 && val(bias.id).rows() == val(x.id).rows(), "add_bias");
  Node n;
  n.op = Op::add_bias;
  n.a = x.id;
  n.b = bias.id;
  n.value = val(x.id).colwise() + val(bias.id).col(0);
  n.requires_grad = needs(x.id) || needs(bias.id);
  return push(std::move(n));
}

Var Tape::scale_columns(Var x, Var row) {
  require(val(row.id).rows() == 1 && val(row.id).cols() == val(x.id).cols(), "scale_columns");
  Node n;
  n.op = Op::scale_columns;
  n.a = x.id;
  n.b = row.id;
  n.value = val(x.id) * val(row.id).row(0).asDiagonal();
  n.requires_grad = needs(x.id) || needs(row.id);
  return push(std::move(n));
}

Var Tape::broadcast_rows(Var row, Eigen::Index rows) {
  require(val(row.id).rows() == 1, "broadcast_rows");
  Node n;
  n.op = Op::broadcast_rows;
  n.a = row.id;
  n.value = val(row.id).replicate(rows, 1);
  n.requires_grad = needs(row.id);
  return push(std::move(n));
}

Var Tape::tanh(Var x) {
  Node n;
  n.op = Op::tanh;
  n.a = x.id;
  n.value = val(x.id).array().tanh();
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  Node n;
  n.op = Op::relu;
  n.a = x.id;
  n.value = val(x.id).cwiseMax(0.0);
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::exp(Var x) {
  Node n;
  n.op = Op::exp;
  n.a = x.id;
  n.value = val(x.id).array().exp();
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::log(Var x) {
  Node n;
  n.op = Op::log;
  n.a = x.id;
  n.value = val(x.id).array().log();
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::square(Var x) {
  Node n;
  n.op = Op::square;
  n.a = x.id;
  n.value = val(x.id).array().square();
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::softmax(Var x) {
  Node n;
  n.op = Op::softmax;
  n.a = x.id;
  n.value = column_softmax(val(x.id));
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::log_softmax(Var x) {
  const Matrix& in = val(x.id);
  Node n;
  n.op = Op::log_softmax;
  n.a = x.id;
  n.value.resize(in.rows(), in.cols());
  for (Eigen::Index j = 0; j < in.cols(); ++j) {
    const double mx = in.col(j).maxCoeff();
    const double lse = mx + std::log((in.col(j).array() - mx).exp().sum());
    n.value.col(j) = in.col(j).array() - lse;
  }
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::sum(Var x) {
  Node n;
  n.op = Op::sum;
  n.a = x.id;
  n.value = Matrix::Constant(1, 1, val(x.id).sum());
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::mean(Var x) {
  require(val(x.id).size() > 0, "mean");
  Node n;
  n.op = Op::mean;
  n.a = x.id;
  n.value = Matrix::Constant(1, 1, val(x.id).mean());
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::col_sum(Var x) {
  Node n;
  n.op = Op::col_sum;
  n.a = x.id;
  n.value = val(x.id).colwise().sum();
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::pick(Var x, std::vector<int> row_per_col) {
  const Matrix& in = val(x.id);
  require(static_cast<Eigen::Index>(row_per_col.size()) == in.cols(), "pick");
  Node n;
  n.op = Op::pick;
  n.a = x.id;
  n.value.resize(1, in.cols());
  for (Eigen::Index j = 0; j < in.cols(); ++j) {
    const int r = row_per_col[static_cast<std::size_t>(j)];
    require(r >= 0 && r < in.rows(), "pick");
    n.value(0, j) = in(r, j);
  }
  n.index = std::move(row_per_col);
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::select_cols(Var x, std::vector<int> cols) {
  const Matrix& in = val(x.id);
  Node n;
  n.op = Op::select_cols;
  n.a = x.id;
  n.value.resize(in.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    require(cols[j] >= 0 && cols[j] < in.cols(), "select_cols");
    n.value.col(static_cast<Eigen::Index>(j)) = in.col(cols[j]);
  }
  n.index = std::move(cols);
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::clamp(Var x, double lo, double hi) {
  Node n;
  n.op = Op::clamp;
  n.a = x.id;
  n.s0 = lo;
  n.s1 = hi;
  n.value = val(x.id).cwiseMax(lo).cwiseMin(hi);
  n.requires_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::minimum(Var a, Var b) {
  require(val(a.id).rows() == val(b.id).rows() && val(a.id).cols() == val(b.id).cols(), "minimum");
  Node n;
  n.op = Op::minimum;
  n.a = a.id;
  n.b = b.id;
  n.value = val(a.id).cwiseMin(val(b.id));
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::concat_rows(Var a, Var b) {
  require(val(a.id).cols() == val(b.id).cols(), "concat_rows");
  Node n;
  n.op = Op::concat_rows;
  n.a = a.id;
  n.b = b.id;
  n.value.resize(val(a.id).rows() + val(b.id).rows(), val(a.id).cols());
  n.value << val(a.id), val(b.id);
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

std::string_view Tape::op_name(Op op) {
  switch (op) {
    case Op::constant: return "constant";
    case Op::parameter: return "parameter";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::hadamard: return "hadamard";
    case Op::scale: return "scale";
    case Op::add_scalar: return "add_scalar";
    case Op::add_bias: return "add_bias";
    case Op::scale_columns: return "scale_columns";
    case Op::broadcast_rows: return "broadcast_rows";
    case Op::tanh: return "tanh";
    case Op::relu: return "relu";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::square: return "square";
    case Op::softmax: return "softmax";
    case Op::log_softmax: return "log_softmax";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::col_sum: return "col_sum";
    case Op::pick: return "pick";
    case Op::select_cols: return "select_cols";
    case Op::clamp: return "clamp";
    case Op::minimum: return "minimum";
    case Op::concat_rows: return "concat_rows";
  }
  return "unknown";
}

void Tape::backward(Var loss) {
  const Matrix& lv = val(loss.id);
  if (lv.rows() != 1 || lv.cols() != 1) throw ConfigError("tape: loss must be 1 x 1");
  if (!std::isfinite(lv(0, 0))) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!val(static_cast<int>(i)).allFinite()) {
        throw NumericError("tape: non-finite value first produced by '" +
                           std::string(op_name(nodes_[i].op)) + "' (node " + std::to_string(i) + ")");
      }
    }
    throw NumericError("tape: non-finite loss");
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[static_cast<std::size_t>(loss.id)].requires_grad) return;
  nodes_[static_cast<std::size_t>(loss.id)].grad = Matrix::Ones(1, 1);

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::constant:
      case Op::parameter:
        break;
      case Op::matmul:
        if (needs(n.a)) accumulate(n.a, g * val(n.b).transpose());
        if (needs(n.b)) accumulate(n.b, val(n.a).transpose() * g);
        break;
      case Op::add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::sub:
        accumulate(n.a, g);
        if (needs(n.b)) accumulate(n.b, -g);
        break;
      case Op::hadamard:
        if (needs(n.a)) accumulate(n.a, g.cwiseProduct(val(n.b)));
        if (needs(n.b)) accumulate(n.b, g.cwiseProduct(val(n.a)));
        break;
      case Op::scale:
        accumulate(n.a, g * n.s0);
        break;
      case Op::add_scalar:
        accumulate(n.a, g);
        break;
      case Op::add_bias:
        accumulate(n.a, g);
        if (needs(n.b)) accumulate(n.b, g.rowwise().sum());
        break;
      case Op::scale_columns:
        if (needs(n.a)) accumulate(n.a, g * val(n.b).row(0).asDiagonal());
        if (needs(n.b)) accumulate(n.b, g.cwiseProduct(val(n.a)).colwise().sum());
        break;
      case Op::broadcast_rows:
        accumulate(n.a, g.colwise().sum());
        break;
      case Op::tanh:
        accumulate(n.a, g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      case Op::relu:
        accumulate(n.a, (val(n.a).array() > 0.0).select(g, 0.0));
        break;
      case Op::exp:
        accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case Op::log:
        accumulate(n.a, g.cwiseQuotient(val(n.a)));
        break;
      case Op::square:
        accumulate(n.a, 2.0 * g.cwiseProduct(val(n.a)));
        break;
      case Op::softmax: {
        const RowVector dot = g.cwiseProduct(n.value).colwise().sum();
        accumulate(n.a, n.value.cwiseProduct(g - dot.replicate(g.rows(), 1)));
        break;
      }
      case Op::log_softmax: {
        const Matrix p = n.value.array().exp();
        const RowVector gs = g.colwise().sum();
        accumulate(n.a, g - p * gs.asDiagonal());
        break;
      }
      case Op::sum:
        accumulate(n.a, Matrix::Constant(val(n.a).rows(), val(n.a).cols(), g(0, 0)));
        break;
      case Op::mean: {
        const Matrix& in = val(n.a);
        accumulate(n.a, Matrix::Constant(in.rows(), in.cols(), g(0, 0) / static_cast<double>(in.size())));
        break;
      }
      case Op::col_sum:
        accumulate(n.a, g.replicate(val(n.a).rows(), 1));
        break;
      case Op::pick: {
        Matrix ga = Matrix::Zero(val(n.a).rows(), val(n.a).cols());
        for (Eigen::Index j = 0; j < ga.cols(); ++j) ga(n.index[static_cast<std::size_t>(j)], j) = g(0, j);
        accumulate(n.a, ga);
        break;
      }
      case Op::select_cols: {
        Matrix ga = Matrix::Zero(val(n.a).rows(), val(n.a).cols());
        for (std::size_t j = 0; j < n.index.size(); ++j) ga.col(n.index[j]) += g.col(static_cast<Eigen::Index>(j));
        accumulate(n.a, ga);
        break;
      }
      case Op::clamp: {
        const Matrix& in = val(n.a);
        accumulate(n.a, ((in.array() >= n.s0) && (in.array() <= n.s1)).select(g, 0.0));
        break;
      }
      case Op::minimum: {
        const auto take_a = (val(n.a).array() <= val(n.b).array());
        if (needs(n.a)) accumulate(n.a, take_a.select(g, 0.0));
        if (needs(n.b)) accumulate(n.b, take_a.select(Matrix::Zero(g.rows(), g.cols()), g));
        break;
      }
      case Op::concat_rows: {
        const Eigen::Index ra = val(n.a).rows();
        if (needs(n.a)) accumulate(n.a, g.topRows(ra));
        if (needs(n.b)) accumulate(n.b, g.bottomRows(g.rows() - ra));
        break;
      }
    }
  }
}

Matrix Tape::gradient(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.size() == 0) return Matrix::Zero(val(v.id).rows(), val(v.id).cols());
  return n.grad;
}

Matrix Tape::gradient(const Matrix& parameter) const {
  auto it = bound_.find(&parameter);
  if (it == bound_.end()) return Matrix::Zero(parameter.rows(), parameter.cols());
  return gradient(Var{const_cast<Tape*>(this), it->second});
}

}  // namespace adap
