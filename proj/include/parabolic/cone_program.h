#pragma once

#include <vector>

#include "parabolic/qcqp.h"
#include "parabolic/relaxation.h"

namespace parabolic {

/// Standard-form conic program
///
///   minimize    cᵀx + c0
///   subject to  A x = b
///               G x + s = h,  s ∈ ℝ₊^l × Q^{q_1} × … × Q^{q_r}
///
/// where Q^q is the second-order cone {(s0, s1) : ‖s1‖ ≤ s0}. A rotated model
/// cone ‖v‖² ≤ t·u is stored as the second-order cone (t + u, t − u, 2v).
struct ConeProgram {
  Vector c;
  double c0 = 0.0;
  SparseMatrix A;
  Vector b;
  SparseMatrix G;
  Vector h;
  int num_nonneg = 0;
  std::vector<int> soc_dims;

  // Per equality row and per nonnegative row: lifted constraint index k, or -1
  // for box cuts.
  std::vector<int> eq_constraint;
  std::vector<int> ineq_constraint;
  // Per second-order cone: model pair index, or -1.
  std::vector<int> cone_pair;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_eq() const { return static_cast<int>(b.size()); }
  int num_cone_rows() const { return static_cast<int>(h.size()); }
  int num_soc() const { return static_cast<int>(soc_dims.size()); }
};

ConeProgram encode_cone_program(const RelaxationModel& model);

/// Residuals in the layout of RelaxationModel::row_residuals: Ax − b, then
/// Gx − h on the nonnegative rows, then (s0² − ‖s1‖²)/4 per cone with s = h − Gx.
Vector cone_residuals(const ConeProgram& prog, const Vector& x);

}  // namespace parabolic
