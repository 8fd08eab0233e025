#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "parabolic/qcqp.h"

namespace parabolic {

enum class PairSign { kMinus, kPlus };

/// One parabolic row X_ii + X_jj ± 2X_ij ≥ ‖(e_i ± e_j)ᵀY‖². Indices are 0-based
/// with i ≤ j; for i = j only kPlus is stored and the row reads X_ii ≥ ‖e_iᵀY‖².
struct ParabolicPair {
  int i;
  int j;
  PairSign sign;

  bool operator==(const ParabolicPair&) const = default;
};

enum class PairPolicy { kFull, kSparsity };

std::vector<ParabolicPair> select_pairs(const QcqpInstance& inst, PairPolicy policy);
// kFull for n ≤ 64, kSparsity above.
PairPolicy default_pair_policy(const QcqpInstance& inst);

/// Sparse affine function Σ val[r]·z[idx[r]] + constant of the flat decision vector z.
struct AffineExpr {
  std::vector<int> idx;
  std::vector<double> val;
  double constant = 0.0;

  void add(int index, double value);
  void add(const AffineExpr& other, double scale);
  double eval(const Vector& z) const;
  // Sums duplicate indices and drops exact zeros.
  void compress();
};

enum class RowKind { kEquality, kInequality };  // expr = 0 or expr ≤ 0

enum class BoxCut { kLowerUpper, kUpperUpper, kLowerLower };

struct LinearRow {
  AffineExpr expr;
  RowKind kind;
  // Lifted constraint index k ≥ 1, or -1 for a box cut.
  int constraint = -1;
  // For box cuts: the variable and the cut family.
  int cut_variable = -1;
  BoxCut cut = BoxCut::kLowerUpper;
};

/// Rotated cone ‖v‖² ≤ t·u with t, u ≥ 0.
struct ConeRow {
  AffineExpr t;
  AffineExpr u;
  std::vector<AffineExpr> v;
  // Index into RelaxationModel::pairs(), or -1 for cones that are not parabolic pairs.
  int pair = -1;
};

/// Convex relaxation over the flat vector z = (vec Y, stored entries of X).
///
/// Y entries come first in column-major order. X entries are stored only for
/// index pairs referenced by a constraint, the objective or a cone row. A row of
/// Y with no stored X_ii is left out of the penalty term.
class RelaxationModel {
 public:
  RelaxationModel(std::shared_ptr<const QcqpInstance> inst, std::optional<Matrix> anchor,
                  double eta);

  const QcqpInstance& instance() const { return *inst_; }
  std::shared_ptr<const QcqpInstance> instance_ptr() const { return inst_; }
  const std::optional<Matrix>& anchor() const { return anchor_; }
  double eta() const { return eta_; }
  const std::vector<ParabolicPair>& pairs() const { return pairs_; }
  bool has_box_cuts() const { return box_cuts_; }

  int num_vars() const { return num_vars_; }
  int y_var(int i, int c) const { return c * inst_->n() + i; }
  // -1 when X_ij is not a decision variable.
  int x_var(int i, int j) const;
  int num_x_vars() const { return num_vars_ - inst_->n() * inst_->m(); }

  const AffineExpr& objective() const { return objective_; }
  const std::vector<LinearRow>& rows() const { return rows_; }
  const std::vector<ConeRow>& cones() const { return cones_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  int num_equality_rows() const;
  int num_inequality_rows() const;

  // Flatten a lifted point; X entries that are not variables are ignored.
  Vector flatten(const LiftedPoint& p) const;
  // Recover (Y, X). X entries that are not variables are filled from Y Yᵀ.
  LiftedPoint lift(const Vector& z) const;

  double objective_value(const Vector& z) const;
  // Equality rows (expr), inequality rows (expr, feasible when ≤ 0), then one
  // entry t·u − ‖v‖² per cone (feasible when ≥ 0), in model order.
  Vector row_residuals(const Vector& z) const;

  // Builder interface.
  int add_x_var(int i, int j);
  void add_row(LinearRow row) { rows_.push_back(std::move(row)); }
  void add_cone(ConeRow cone) { cones_.push_back(std::move(cone)); }
  void add_pair(const ParabolicPair& p) { pairs_.push_back(p); }
  void set_objective(AffineExpr obj) { objective_ = std::move(obj); }
  void set_box_cuts(bool on) { box_cuts_ = on; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  // Lifted expression tr{A X} + 2 tr{BᵀY} + c; adds X variables as needed.
  AffineExpr lifted_expr(const QuadForm& form);

 private:
  static int64_t key(int i, int j, int n);

  std::shared_ptr<const QcqpInstance> inst_;
  std::optional<Matrix> anchor_;
  double eta_;
  std::vector<ParabolicPair> pairs_;
  bool box_cuts_ = false;
  int num_vars_;
  std::unordered_map<int64_t, int> x_index_;
  std::vector<std::pair<int, int>> x_entries_;
  AffineExpr objective_;
  std::vector<LinearRow> rows_;
  std::vector<ConeRow> cones_;
  std::vector<std::string> warnings_;
};

/// Penalized parabolic relaxation with objective q̄₀ + η·tr{X − 2Y̌Yᵀ + Y̌Y̌ᵀ}.
/// η = 0 gives the unpenalized bounding relaxation, in which case the anchor
/// may be absent.
RelaxationModel build_parabolic_model(std::shared_ptr<const QcqpInstance> inst,
                                      const std::vector<ParabolicPair>& pairs,
                                      const std::optional<Matrix>& anchor, double eta);
RelaxationModel build_parabolic_model(const QcqpInstance& inst,
                                      const std::vector<ParabolicPair>& pairs,
                                      const std::optional<Matrix>& anchor, double eta);

/// Appends the three bound cuts per scalar variable. Infinite bounds skip the
/// cuts they enter and record a warning.
void add_box_cuts(RelaxationModel& model, const Vector& lower, const Vector& upper);

/// Second-order cone baseline: X_ii ≥ ‖e_iᵀY‖² and X_ij² ≤ X_ii X_jj for each
/// off-diagonal X entry referenced by the instance.
RelaxationModel build_socp_baseline(std::shared_ptr<const QcqpInstance> inst);
RelaxationModel build_socp_baseline(const QcqpInstance& inst);

}  // namespace parabolic
