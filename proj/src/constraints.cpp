#include "matcomp/constraints.hpp"

#include <stdexcept>

namespace matcomp {

ViolationCounts& ViolationCounts::operator+=(const ViolationCounts& o) {
  exclusivity += o.exclusivity;
  composition_id += o.composition_id;
  constituent_id += o.constituent_id;
  unique_id += o.unique_id;
  return *this;
}

std::vector<ConstraintInstance> enumerate_instances(int R, int C, ConstraintMask mask) {
  std::vector<ConstraintInstance> out;
  if (mask.exclusivity) {
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j)
        for (int l = 1; l <= 2; ++l) out.push_back({1, true, i, l, false, j, l});
  }
  if (mask.composition_id) {
    for (int i1 = 0; i1 < R; ++i1)
      for (int i2 = 0; i2 < R; ++i2)
        if (i1 != i2) out.push_back({2, true, i1, 1, true, i2, 3});
    for (int j1 = 0; j1 < C; ++j1)
      for (int j2 = 0; j2 < C; ++j2)
        if (j1 != j2) out.push_back({2, false, j1, 1, false, j2, 3});
  }
  if (mask.constituent_id) {
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j)
        for (int l = 2; l <= 3; ++l) out.push_back({3, true, i, l, false, j, 5 - l});
  }
  if (mask.unique_id) {
    for (int i1 = 0; i1 < R; ++i1)
      for (int i2 = i1 + 1; i2 < R; ++i2) out.push_back({4, true, i1, 3, true, i2, 3});
    for (int j1 = 0; j1 < C; ++j1)
      for (int j2 = j1 + 1; j2 < C; ++j2) out.push_back({4, false, j1, 3, false, j2, 3});
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j) out.push_back({4, true, i, 3, false, j, 3});
  }
  return out;
}

ViolationCounts count_violations(const std::vector<RowColLabel>& rows,
                                 const std::vector<RowColLabel>& cols) {
  auto count = [](const std::vector<RowColLabel>& v, RowColLabel l) {
    int n = 0;
    for (auto x : v) n += x == l;
    return n;
  };
  using L = RowColLabel;
  const int r1 = count(rows, L::Composition), r2 = count(rows, L::Constituent), r3 = count(rows, L::Id);
  const int c1 = count(cols, L::Composition), c2 = count(cols, L::Constituent), c3 = count(cols, L::Id);
  ViolationCounts v;
  v.exclusivity = r1 * c1 + r2 * c2;
  // Ordered pairs of distinct lines; a line cannot carry both labels, so no self pairs arise.
  v.composition_id = r1 * r3 + c1 * c3;
  v.constituent_id = r2 * c3 + r3 * c2;
  v.unique_id = r3 * (r3 - 1) / 2 + c3 * (c3 - 1) / 2 + r3 * c3;
  return v;
}

PenaltyValue penalty(const nn::Matrix& row_probs, const nn::Matrix& col_probs, double lambda,
                     ConstraintMask mask) {
  if (row_probs.cols != 4 || col_probs.cols != 4) {
    throw std::invalid_argument("penalty: probabilities must have 4 columns");
  }
  PenaltyValue out;
  out.grad_rows = nn::Matrix(row_probs.rows, 4);
  out.grad_cols = nn::Matrix(col_probs.rows, 4);
  for (const auto& inst : enumerate_instances(row_probs.rows, col_probs.rows, mask)) {
    const double pa = inst.a_row ? row_probs(inst.a_index, inst.a_label) : col_probs(inst.a_index, inst.a_label);
    const double pb = inst.b_row ? row_probs(inst.b_index, inst.b_label) : col_probs(inst.b_index, inst.b_label);
    const double slack = pa + pb - 1.0;
    if (slack <= 0.0) continue;
    out.value += lambda * slack;
    (inst.a_row ? out.grad_rows : out.grad_cols)(inst.a_index, inst.a_label) += lambda;
    (inst.b_row ? out.grad_rows : out.grad_cols)(inst.b_index, inst.b_label) += lambda;
  }
  return out;
}

nn::Var penalty_loss(nn::Var row_probs, nn::Var col_probs, double lambda, ConstraintMask mask) {
  nn::Tape& t = *row_probs.tape;
  auto res = penalty(row_probs.value(), col_probs.value(), lambda, mask);
  const int ir = row_probs.id, ic = col_probs.id;
  return t.push(nn::Matrix(1, 1, res.value), {ir, ic},
                [ir, ic, gr = std::move(res.grad_rows), gc = std::move(res.grad_cols)](nn::Tape& t, int self) {
                  const double g = t.grad(self).data[0];
                  if (nn::Matrix* b = t.grad_buffer(ir))
                    for (std::size_t k = 0; k < gr.size(); ++k) b->data[k] += g * gr.data[k];
                  if (nn::Matrix* b = t.grad_buffer(ic))
                    for (std::size_t k = 0; k < gc.size(); ++k) b->data[k] += g * gc.data[k];
                });
}

}  // namespace matcomp
