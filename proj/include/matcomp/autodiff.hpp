#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace matcomp::nn {

/// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(std::size_t(r) * c, fill) {}

  double& operator()(int i, int j) { return data[std::size_t(i) * cols + j]; }
  double operator()(int i, int j) const { return data[std::size_t(i) * cols + j]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// A trainable tensor. Gradients accumulate across backward passes until zero_grad().
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  /// Optimizer group: 0 = text encoder, 1 = everything else, -1 = buffer (not trained).
  int group = 1;
  // Adam moments.
  Matrix m;
  Matrix v;

  Param(std::string n, Matrix init, int g)
      : name(std::move(n)), value(std::move(init)), grad(value.rows, value.cols), group(g),
        m(value.rows, value.cols), v(value.rows, value.cols) {}
  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  int rows() const { return value().rows; }
  int cols() const { return value().cols; }
  double scalar() const { return value().data.at(0); }
};

/// Reverse-mode tape. Values are recorded in creation order; backward() walks them in reverse.
/// A tape supports exactly one backward pass.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Var constant(Matrix value);
  /// Leaf bound to a parameter; its gradient is added to param.grad by backward().
  Var param(Param& p);

  Var push(Matrix value, const std::vector<int>& inputs, Backward fn);
  /// Input-free node whose backward writes straight into parameter storage (sparse updates).
  Var push_trainable(Matrix value, Backward fn);

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  /// Gradient buffer of node `id`, allocated on first use. Null when the node needs no gradient.
  Matrix* grad_buffer(int id);
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 loss and propagates. Throws std::logic_error if the
  /// tape was already consumed.
  void backward(Var loss);
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Param* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Elementwise and linear algebra. Binary ops accept a 1-row right operand that is broadcast
// over the rows of the left operand.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var elu(Var a);
Var leaky_relu(Var a, double slope);
Var relu(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var exp(Var a);
/// 1x1 sum of all entries.
Var sum(Var a);
Var mean(Var a);
/// Row-wise softmax.
Var softmax_rows(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(Var a, const std::vector<int>& index);
/// out[segment[k]] += a[k]; out has `segments` rows.
Var segment_sum(Var a, const std::vector<int>& segment, int segments);
/// Softmax over the rows sharing a segment id, independently per column.
Var segment_softmax(Var a, const std::vector<int>& segment, int segments);
/// (n x heads*width) -> (n x heads): sums each head's block.
Var head_reduce(Var a, int heads);
/// (n x heads) -> (n x heads*width): repeats each head's value across its block.
Var head_expand(Var a, int width);
/// (n x heads*width) -> (n x width): mean over heads.
Var head_mean(Var a, int heads);
/// Multiplies by a constant mask (dropout with a precomputed mask).
Var mul_const(Var a, const Matrix& mask);

/// Mean of table rows per bag; an empty bag yields zeros. Gradients are scattered sparsely
/// into table.grad.
Var embedding_bag_mean(Tape& tape, Param& table, const std::vector<std::vector<int>>& bags);

/// Batch normalization over rows (training mode). With a single row it returns the input
/// scaled by gamma and shifted by beta, i.e. normalization degrades to identity.
/// Writes the batch mean/variance to `batch_mean` / `batch_var` when given.
Var batch_norm_train(Var x, Var gamma, Var beta, double eps, Matrix* batch_mean, Matrix* batch_var);
/// Inference-mode batch normalization with fixed statistics.
Var batch_norm_eval(Var x, Var gamma, Var beta, const Matrix& mean, const Matrix& var, double eps);

/// Mean binary cross entropy on logits, per-row weights (empty = 1). Returns 1x1.
/// Targets and weights are n-vectors for an n x 1 logit column.
Var bce_with_logits(Var logits, const std::vector<double>& targets,
                    const std::vector<double>& weights = {});
/// Weighted softmax cross entropy: sum_k w[y_k] * CE_k / sum_k w[y_k]. Returns 1x1.
Var cross_entropy(Var logits, const std::vector<int>& targets,
                  const std::vector<double>& class_weights = {});

/// Numerically safe helpers.
double sigmoid(double x);
double softplus(double x);

}  // namespace matcomp::nn
