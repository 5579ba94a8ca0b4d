#include "matcomp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

namespace matcomp::nn {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) { return ConstMap(m.data.data(), m.rows, m.cols); }
MutMap view(Matrix& m) { return MutMap(m.data.data(), m.rows, m.cols); }

std::string shape(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
}

Tape& tape_of(Var a) {
  if (!a.tape) throw std::invalid_argument("variable is not bound to a tape");
  return *a.tape;
}

// Whether b broadcasts over the rows of a.
bool broadcasts(const Matrix& a, const Matrix& b, const char* op) {
  if (a.same_shape(b)) return false;
  if (b.rows == 1 && b.cols == a.cols) return true;
  shape_error(op, a, b);
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename F, typename D>
Var unary(Var a, F f, D d) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix y(x.rows, x.cols);
  for (std::size_t k = 0; k < x.size(); ++k) y.data[k] = f(x.data[k]);
  const int ia = a.id;
  return t.push(std::move(y), {ia}, [ia, d](Tape& t, int self) {
    Matrix* ga = t.grad_buffer(ia);
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(ia);
    const Matrix& y = t.value(self);
    for (std::size_t k = 0; k < x.size(); ++k) ga->data[k] += g.data[k] * d(x.data[k], y.data[k]);
  });
}

}  // namespace

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int i = 0; i < m.rows; ++i) {
    if (static_cast<int>(rows[i].size()) != m.cols) throw std::invalid_argument("ragged matrix rows");
    std::copy(rows[i].begin(), rows[i].end(), m.data.begin() + std::size_t(i) * m.cols);
  }
  return m;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix value) { return push(std::move(value), {}, nullptr); }

Var Tape::param(Param& p) {
  Var v = push(p.value, {}, nullptr);
  nodes_[v.id].param = &p;
  nodes_[v.id].needs_grad = p.group >= 0;
  return v;
}

Var Tape::push(Matrix value, const std::vector<int>& inputs, Backward fn) {
  if (consumed_) throw std::logic_error("tape already consumed by backward()");
  Node node;
  node.value = std::move(value);
  for (int in : inputs) node.needs_grad = node.needs_grad || nodes_.at(in).needs_grad;
  if (node.needs_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push_trainable(Matrix value, Backward fn) {
  Var v = push(std::move(value), {}, nullptr);
  nodes_[v.id].needs_grad = true;
  nodes_[v.id].backward = std::move(fn);
  return v;
}

Matrix* Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (n.grad.size() != n.value.size()) n.grad = Matrix(n.value.rows, n.value.cols);
  return &n.grad;
}

void Tape::backward(Var loss) {
  if (consumed_) throw std::logic_error("backward() called twice on the same tape");
  if (loss.tape != this) throw std::invalid_argument("loss belongs to another tape");
  if (loss.value().size() != 1) throw std::invalid_argument("backward() needs a 1x1 loss");
  consumed_ = true;
  if (!nodes_[loss.id].needs_grad) return;
  grad_buffer(loss.id)->data[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param) {
      auto& pg = n.param->grad.data;
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad.data[k];
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (x.cols != y.rows) shape_error("matmul", x, y);
  Matrix out(x.rows, y.cols);
  view(out).noalias() = view(x) * view(y);
  const int ia = a.id, ib = b.id;
  return t.push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    auto g = view(t.grad(self));
    if (Matrix* ga = t.grad_buffer(ia)) view(*ga).noalias() += g * view(t.value(ib)).transpose();
    if (Matrix* gb = t.grad_buffer(ib)) view(*gb).noalias() += view(t.value(ia)).transpose() * g;
  });
}

namespace {

// sign = +1 for add, -1 for sub.
Var add_sub(Var a, Var b, double sign, const char* name) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  const bool bc = broadcasts(x, y, name);
  Matrix out = x;
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out(i, j) += sign * (bc ? y(0, j) : y(i, j));
  const int ia = a.id, ib = b.id;
  return t.push(std::move(out), {ia, ib}, [ia, ib, bc, sign](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (Matrix* ga = t.grad_buffer(ia))
      for (std::size_t k = 0; k < g.size(); ++k) ga->data[k] += g.data[k];
    if (Matrix* gb = t.grad_buffer(ib)) {
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) (bc ? (*gb)(0, j) : (*gb)(i, j)) += sign * g(i, j);
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return add_sub(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_sub(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  const bool bc = broadcasts(x, y, "mul");
  Matrix out = x;
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out(i, j) *= bc ? y(0, j) : y(i, j);
  const int ia = a.id, ib = b.id;
  return t.push(std::move(out), {ia, ib}, [ia, ib, bc](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(ia);
    const Matrix& y = t.value(ib);
    Matrix* ga = t.grad_buffer(ia);
    Matrix* gb = t.grad_buffer(ib);
    for (int i = 0; i < g.rows; ++i) {
      for (int j = 0; j < g.cols; ++j) {
        const double yv = bc ? y(0, j) : y(i, j);
        if (ga) (*ga)(i, j) += g(i, j) * yv;
        if (gb) (bc ? (*gb)(0, j) : (*gb)(i, j)) += g(i, j) * x(i, j);
      }
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var elu(Var a) {
  return unary(
      a, [](double x) { return x > 0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0 ? 1.0 : y + 1.0; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return sigmoid(x); }, [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data) s += v;
  const int ia = a.id;
  return t.push(Matrix(1, 1, s), {ia}, [ia](Tape& t, int self) {
    Matrix* ga = t.grad_buffer(ia);
    const double g = t.grad(self).data[0];
    for (double& v : ga->data) v += g;
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  return scale(sum(a), n > 0 ? 1.0 / n : 0.0);
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix y(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    double mx = x(i, 0);
    for (int j = 1; j < x.cols; ++j) mx = std::max(mx, x(i, j));
    double z = 0.0;
    for (int j = 0; j < x.cols; ++j) z += (y(i, j) = std::exp(x(i, j) - mx));
    for (int j = 0; j < x.cols; ++j) y(i, j) /= z;
  }
  const int ia = a.id;
  return t.push(std::move(y), {ia}, [ia](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix* ga = t.grad_buffer(ia);
    for (int i = 0; i < y.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < y.cols; ++j) dot += g(i, j) * y(i, j);
      for (int j = 0; j < y.cols; ++j) (*ga)(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const int rows = parts.front().rows();
  int cols = 0;
  std::vector<int> ids;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  int offset = 0;
  for (const auto& p : parts) {
    const Matrix& v = p.value();
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < v.cols; ++j) out(i, offset + j) = v(i, j);
    offset += v.cols;
  }
  return t.push(std::move(out), ids, [ids](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    int offset = 0;
    for (int id : ids) {
      const int w = t.value(id).cols;
      if (Matrix* gp = t.grad_buffer(id))
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < w; ++j) (*gp)(i, j) += g(i, offset + j);
      offset += w;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Tape& t = tape_of(parts.front());
  const int cols = parts.front().cols();
  int rows = 0;
  std::vector<int> ids;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts.front().value(), p.value());
    rows += p.rows();
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  auto it = out.data.begin();
  for (const auto& p : parts) it = std::copy(p.value().data.begin(), p.value().data.end(), it);
  return t.push(std::move(out), ids, [ids](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    std::size_t offset = 0;
    for (int id : ids) {
      const std::size_t n = t.value(id).size();
      if (Matrix* gp = t.grad_buffer(id))
        for (std::size_t k = 0; k < n; ++k) gp->data[k] += g.data[offset + k];
      offset += n;
    }
  });
}

Var gather_rows(Var a, const std::vector<int>& index) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(static_cast<int>(index.size()), x.cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || index[r] >= x.rows) throw std::out_of_range("gather_rows: index out of range");
    std::copy_n(x.data.begin() + std::size_t(index[r]) * x.cols, x.cols,
                out.data.begin() + r * x.cols);
  }
  const int ia = a.id;
  return t.push(std::move(out), {ia}, [ia, index](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix* ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < index.size(); ++r)
      for (int j = 0; j < g.cols; ++j) (*ga)(index[r], j) += g(static_cast<int>(r), j);
  });
}

Var segment_sum(Var a, const std::vector<int>& segment, int segments) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (static_cast<int>(segment.size()) != x.rows) throw std::invalid_argument("segment_sum: length mismatch");
  Matrix out(segments, x.cols);
  for (int r = 0; r < x.rows; ++r)
    for (int j = 0; j < x.cols; ++j) out(segment[r], j) += x(r, j);
  const int ia = a.id;
  return t.push(std::move(out), {ia}, [ia, segment](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix* ga = t.grad_buffer(ia);
    for (int r = 0; r < ga->rows; ++r)
      for (int j = 0; j < ga->cols; ++j) (*ga)(r, j) += g(segment[r], j);
  });
}

Var segment_softmax(Var a, const std::vector<int>& segment, int segments) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (static_cast<int>(segment.size()) != x.rows) throw std::invalid_argument("segment_softmax: length mismatch");
  Matrix mx(segments, x.cols, -std::numeric_limits<double>::infinity());
  for (int r = 0; r < x.rows; ++r)
    for (int j = 0; j < x.cols; ++j) mx(segment[r], j) = std::max(mx(segment[r], j), x(r, j));
  Matrix y(x.rows, x.cols);
  Matrix z(segments, x.cols);
  for (int r = 0; r < x.rows; ++r)
    for (int j = 0; j < x.cols; ++j) z(segment[r], j) += (y(r, j) = std::exp(x(r, j) - mx(segment[r], j)));
  for (int r = 0; r < x.rows; ++r)
    for (int j = 0; j < x.cols; ++j) y(r, j) /= z(segment[r], j);
  const int ia = a.id;
  return t.push(std::move(y), {ia}, [ia, segment, segments](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix dot(segments, y.cols);
    for (int r = 0; r < y.rows; ++r)
      for (int j = 0; j < y.cols; ++j) dot(segment[r], j) += g(r, j) * y(r, j);
    Matrix* ga = t.grad_buffer(ia);
    for (int r = 0; r < y.rows; ++r)
      for (int j = 0; j < y.cols; ++j) (*ga)(r, j) += y(r, j) * (g(r, j) - dot(segment[r], j));
  });
}

Var head_reduce(Var a, int heads) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (heads <= 0 || x.cols % heads != 0) throw std::invalid_argument("head_reduce: width not divisible by heads");
  const int w = x.cols / heads;
  Matrix out(x.rows, heads);
  for (int i = 0; i < x.rows; ++i)
    for (int h = 0; h < heads; ++h)
      for (int k = 0; k < w; ++k) out(i, h) += x(i, h * w + k);
  const int ia = a.id;
  return t.push(std::move(out), {ia}, [ia, heads, w](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix* ga = t.grad_buffer(ia);
    for (int i = 0; i < g.rows; ++i)
      for (int h = 0; h < heads; ++h)
        for (int k = 0; k < w; ++k) (*ga)(i, h * w + k) += g(i, h);
  });
}

Var head_expand(Var a, int width) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const int heads = x.cols;
  Matrix out(x.rows, heads * width);
  for (int i = 0; i < x.rows; ++i)
    for (int h = 0; h < heads; ++h)
      for (int k = 0; k < width; ++k) out(i, h * width + k) = x(i, h);
  const int ia = a.id;
  return t.push(std::move(out), {ia}, [ia, heads, width](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix* ga = t.grad_buffer(ia);
    for (int i = 0; i < g.rows; ++i)
      for (int h = 0; h < heads; ++h)
        for (int k = 0; k < width; ++k) (*ga)(i, h) += g(i, h * width + k);
  });
}

Var head_mean(Var a, int heads) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (heads <= 0 || x.cols % heads != 0) throw std::invalid_argument("head_mean: width not divisible by heads");
  const int w = x.cols / heads;
  Matrix out(x.rows, w);
  for (int i = 0; i < x.rows; ++i)
    for (int h = 0; h < heads; ++h)
      for (int k = 0; k < w; ++k) out(i, k) += x(i, h * w + k) / heads;
  const int ia = a.id;
  return t.push(std::move(out), {ia}, [ia, heads, w](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix* ga = t.grad_buffer(ia);
    for (int i = 0; i < g.rows; ++i)
      for (int h = 0; h < heads; ++h)
        for (int k = 0; k < w; ++k) (*ga)(i, h * w + k) += g(i, k) / heads;
  });
}

Var mul_const(Var a, const Matrix& mask) {
  Tape& t = tape_of(a);
  if (!a.value().same_shape(mask)) shape_error("mul_const", a.value(), mask);
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= mask.data[k];
  const int ia = a.id;
  return t.push(std::move(out), {ia}, [ia, mask](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix* ga = t.grad_buffer(ia);
    for (std::size_t k = 0; k < g.size(); ++k) ga->data[k] += g.data[k] * mask.data[k];
  });
}

Var embedding_bag_mean(Tape& tape, Param& table, const std::vector<std::vector<int>>& bags) {
  const int d = table.value.cols;
  Matrix out(static_cast<int>(bags.size()), d);
  for (std::size_t b = 0; b < bags.size(); ++b) {
    if (bags[b].empty()) continue;
    const double inv = 1.0 / static_cast<double>(bags[b].size());
    for (int tok : bags[b]) {
      if (tok < 0 || tok >= table.value.rows) throw std::out_of_range("embedding_bag_mean: token out of range");
      for (int j = 0; j < d; ++j) out(static_cast<int>(b), j) += inv * table.value(tok, j);
    }
  }
  Param* p = &table;
  if (p->group < 0) return tape.constant(std::move(out));
  return tape.push_trainable(std::move(out), [bags, p](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const int d = p->value.cols;
    for (std::size_t b = 0; b < bags.size(); ++b) {
      if (bags[b].empty()) continue;
      const double inv = 1.0 / static_cast<double>(bags[b].size());
      for (int tok : bags[b])
        for (int j = 0; j < d; ++j) p->grad(tok, j) += inv * g(static_cast<int>(b), j);
    }
  });
}

Var batch_norm_train(Var x, Var gamma, Var beta, double eps, Matrix* batch_mean, Matrix* batch_var) {
  Tape& t = tape_of(x);
  const Matrix& v = x.value();
  const int n = v.rows, d = v.cols;
  if (gamma.cols() != d || beta.cols() != d) shape_error("batch_norm", v, gamma.value());
  Matrix mu(1, d), var(1, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) mu(0, j) += v(i, j) / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) var(0, j) += (v(i, j) - mu(0, j)) * (v(i, j) - mu(0, j)) / n;
  if (batch_mean) *batch_mean = mu;
  if (batch_var) *batch_var = var;
  Var xhat;
  if (n == 1) {
    xhat = x;
  } else {
    Matrix out(n, d);
    Matrix inv_std(1, d);
    for (int j = 0; j < d; ++j) inv_std(0, j) = 1.0 / std::sqrt(var(0, j) + eps);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) out(i, j) = (v(i, j) - mu(0, j)) * inv_std(0, j);
    const int ix = x.id;
    xhat = t.push(std::move(out), {ix}, [ix, inv_std](Tape& t, int self) {
      const Matrix& g = t.grad(self);
      const Matrix& xh = t.value(self);
      Matrix* gx = t.grad_buffer(ix);
      const int n = g.rows, d = g.cols;
      for (int j = 0; j < d; ++j) {
        double sg = 0.0, sgx = 0.0;
        for (int i = 0; i < n; ++i) {
          sg += g(i, j);
          sgx += g(i, j) * xh(i, j);
        }
        for (int i = 0; i < n; ++i)
          (*gx)(i, j) += inv_std(0, j) / n * (n * g(i, j) - sg - xh(i, j) * sgx);
      }
    });
  }
  return add(mul(xhat, gamma), beta);
}

Var batch_norm_eval(Var x, Var gamma, Var beta, const Matrix& mean, const Matrix& var, double eps) {
  Tape& t = tape_of(x);
  const int d = x.cols();
  if (mean.cols != d || var.cols != d) shape_error("batch_norm_eval", x.value(), mean);
  Matrix shift(1, d), factor(1, d);
  for (int j = 0; j < d; ++j) {
    factor(0, j) = 1.0 / std::sqrt(var(0, j) + eps);
    shift(0, j) = -mean(0, j) * factor(0, j);
  }
  Matrix f = Matrix(x.rows(), d);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < d; ++j) f(i, j) = factor(0, j);
  Var xhat = add(mul_const(x, f), t.constant(shift));
  return add(mul(xhat, gamma), beta);
}

Var bce_with_logits(Var logits, const std::vector<double>& targets, const std::vector<double>& weights) {
  Tape& t = tape_of(logits);
  const Matrix& z = logits.value();
  if (z.cols != 1 || static_cast<int>(targets.size()) != z.rows)
    throw std::invalid_argument("bce_with_logits: expects n x 1 logits and n targets");
  if (!weights.empty() && weights.size() != targets.size())
    throw std::invalid_argument("bce_with_logits: weight count mismatch");
  const int n = z.rows;
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
    loss += w * (softplus(z(i, 0)) - targets[i] * z(i, 0));
  }
  const double norm = n > 0 ? 1.0 / n : 0.0;
  const int il = logits.id;
  return t.push(Matrix(1, 1, loss * norm), {il}, [il, targets, weights, norm](Tape& t, int self) {
    const double g = t.grad(self).data[0];
    const Matrix& z = t.value(il);
    Matrix* gz = t.grad_buffer(il);
    for (int i = 0; i < z.rows; ++i) {
      const double w = weights.empty() ? 1.0 : weights[i];
      gz->data[i] += g * norm * w * (sigmoid(z(i, 0)) - targets[i]);
    }
  });
}

Var cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<double>& class_weights) {
  Tape& t = tape_of(logits);
  const Matrix& z = logits.value();
  if (static_cast<int>(targets.size()) != z.rows) throw std::invalid_argument("cross_entropy: target count mismatch");
  Matrix p(z.rows, z.cols);
  double loss = 0.0, wsum = 0.0;
  for (int i = 0; i < z.rows; ++i) {
    if (targets[i] < 0 || targets[i] >= z.cols) throw std::out_of_range("cross_entropy: target out of range");
    double mx = z(i, 0);
    for (int j = 1; j < z.cols; ++j) mx = std::max(mx, z(i, j));
    double s = 0.0;
    for (int j = 0; j < z.cols; ++j) s += (p(i, j) = std::exp(z(i, j) - mx));
    for (int j = 0; j < z.cols; ++j) p(i, j) /= s;
    const double w = class_weights.empty() ? 1.0 : class_weights[targets[i]];
    loss += w * (std::log(s) + mx - z(i, targets[i]));
    wsum += w;
  }
  const double norm = wsum > 0 ? 1.0 / wsum : 0.0;
  const int il = logits.id;
  return t.push(Matrix(1, 1, loss * norm), {il}, [il, targets, class_weights, p, norm](Tape& t, int self) {
    const double g = t.grad(self).data[0];
    Matrix* gz = t.grad_buffer(il);
    for (int i = 0; i < p.rows; ++i) {
      const double w = class_weights.empty() ? 1.0 : class_weights[targets[i]];
      for (int j = 0; j < p.cols; ++j)
        (*gz)(i, j) += g * norm * w * (p(i, j) - (j == targets[i] ? 1.0 : 0.0));
    }
  });
}

}  // namespace matcomp::nn
