#pragma once

#include <Eigen/Dense>

#include <string_view>
#include <unordered_map>
#include <vector>

namespace adap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

class Tape;

// Handle to a node on a Tape. Samples are stored column-wise: a batch of B
// feature vectors of size n is an n x B matrix.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

// Reverse-mode differentiation over a fixed vocabulary of batched matrix
// operations. Nodes are appended in evaluation order, so reverse creation
// order is a valid topological order for the backward sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Leaf whose gradient is tracked. The matrix must outlive the tape; binding
  // the same matrix twice returns the same node.
  Var parameter(const Matrix& value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var add_bias(Var x, Var bias);          // bias: rows x 1, broadcast over columns
  Var scale_columns(Var x, Var row);      // row: 1 x cols, column j scaled by row(0, j)
  Var broadcast_rows(Var row, Eigen::Index rows);  // 1 x cols -> rows x cols
  Var tanh(Var x);
  Var relu(Var x);
  Var exp(Var x);
  Var log(Var x);
  Var square(Var x);
  Var softmax(Var x);       // column-wise
  Var log_softmax(Var x);   // column-wise
  Var sum(Var x);           // -> 1 x 1
  Var mean(Var x);          // -> 1 x 1
  Var col_sum(Var x);       // -> 1 x cols
  Var pick(Var x, std::vector<int> row_per_col);   // -> 1 x cols
  Var select_cols(Var x, std::vector<int> cols);
  Var clamp(Var x, double lo, double hi);
  Var minimum(Var a, Var b);
  Var concat_rows(Var a, Var b);

  // Runs the backward sweep from a 1 x 1 loss. Throws NumericError naming the
  // first operation that produced a non-finite value when the loss is not finite.
  void backward(Var loss);

  // Gradient of the last backward() w.r.t. a node; zeros if it did not reach the loss.
  Matrix gradient(Var v) const;
  // Gradient w.r.t. a bound parameter matrix; zeros if unbound or unreached.
  Matrix gradient(const Matrix& parameter) const;

  std::size_t size() const { return nodes_.size(); }
  const Matrix& value(int id) const;

 private:
  enum class Op {
    constant, parameter, matmul, add, sub, hadamard, scale, add_scalar, add_bias, scale_columns,
    broadcast_rows, tanh, relu, exp, log, square, softmax, log_softmax, sum, mean, col_sum, pick,
    select_cols, clamp, minimum, concat_rows
  };

  struct Node {
    Op op = Op::constant;
    int a = -1;
    int b = -1;
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    double s0 = 0.0;
    double s1 = 0.0;
    std::vector<int> index;
  };

  Var push(Node node);
  const Matrix& val(int id) const;
  bool needs(int id) const { return id >= 0 && nodes_[id].requires_grad; }
  void accumulate(int id, const Matrix& g);
  static std::string_view op_name(Op op);

  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, int> bound_;
};

// Expression-style free functions over tape variables.
inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator-(Var a) { return a.tape->scale(a, -1.0); }
inline Var operator*(double s, Var a) { return a.tape->scale(a, s); }
inline Var operator*(Var a, double s) { return a.tape->scale(a, s); }
inline Var operator+(Var a, double s) { return a.tape->add_scalar(a, s); }
inline Var operator-(Var a, double s) { return a.tape->add_scalar(a, -s); }
inline Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
inline Var hadamard(Var a, Var b) { return a.tape->hadamard(a, b); }
inline Var add_bias(Var x, Var b) { return x.tape->add_bias(x, b); }
inline Var scale_columns(Var x, Var row) { return x.tape->scale_columns(x, row); }
inline Var tanh(Var x) { return x.tape->tanh(x); }
inline Var relu(Var x) { return x.tape->relu(x); }
inline Var exp(Var x) { return x.tape->exp(x); }
inline Var log(Var x) { return x.tape->log(x); }
inline Var square(Var x) { return x.tape->square(x); }
inline Var softmax(Var x) { return x.tape->softmax(x); }
inline Var log_softmax(Var x) { return x.tape->log_softmax(x); }
inline Var sum(Var x) { return x.tape->sum(x); }
inline Var mean(Var x) { return x.tape->mean(x); }
inline Var col_sum(Var x) { return x.tape->col_sum(x); }
inline Var minimum(Var a, Var b) { return a.tape->minimum(a, b); }
inline Var clamp(Var x, double lo, double hi) { return x.tape->clamp(x, lo, hi); }

}  // namespace adap
