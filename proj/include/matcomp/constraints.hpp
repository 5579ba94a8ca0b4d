#pragma once

#include <vector>

#include "matcomp/autodiff.hpp"
#include "matcomp/table.hpp"

namespace matcomp {

/// Which of the four structural constraint families are active.
struct ConstraintMask {
  bool exclusivity = true;     // (1) a row and a column never share label 1 or 2
  bool composition_id = true;  // (2) composition and ID lines are orthogonal
  bool constituent_id = true;  // (3) constituent and ID lines are parallel
  bool unique_id = true;       // (4) at most one ID line

  static ConstraintMask all() { return {}; }
  static ConstraintMask none() { return {false, false, false, false}; }
  static ConstraintMask unique_id_only() { return {false, false, false, true}; }
};

struct ViolationCounts {
  int exclusivity = 0;
  int composition_id = 0;
  int constituent_id = 0;
  int unique_id = 0;

  int total() const { return exclusivity + composition_id + constituent_id + unique_id; }
  ViolationCounts& operator+=(const ViolationCounts& o);
  friend bool operator==(const ViolationCounts&, const ViolationCounts&) = default;
};

/// One ground instance "P(a) + P(b) - 1 <= 0". `a_row`/`b_row` select the row or column side.
struct ConstraintInstance {
  int family = 1;
  bool a_row = true;
  int a_index = 0;
  int a_label = 0;
  bool b_row = true;
  int b_index = 0;
  int b_label = 0;
};

/// Every ground instance for an R x C table, in a fixed order, without duplicates.
std::vector<ConstraintInstance> enumerate_instances(int rows, int cols,
                                                    ConstraintMask mask = ConstraintMask::all());

/// Counts violated ground instances of a hard labeling.
ViolationCounts count_violations(const std::vector<RowColLabel>& rows,
                                 const std::vector<RowColLabel>& cols);

struct PenaltyValue {
  double value = 0.0;
  nn::Matrix grad_rows;  // d value / d row_probs
  nn::Matrix grad_cols;
};

/// lambda * sum over instances of max(0, P(a) + P(b) - 1). Probabilities are R x 4 and C x 4.
/// The gradient is the hinge subgradient (0 at the kink).
PenaltyValue penalty(const nn::Matrix& row_probs, const nn::Matrix& col_probs, double lambda,
                     ConstraintMask mask = ConstraintMask::all());

/// Tape version of penalty().
nn::Var penalty_loss(nn::Var row_probs, nn::Var col_probs, double lambda,
                     ConstraintMask mask = ConstraintMask::all());

}  // namespace matcomp
