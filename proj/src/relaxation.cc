#include "parabolic/relaxation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace parabolic {

void AffineExpr::add(int index, double value) {
  idx.push_back(index);
  val.push_back(value);
}

void AffineExpr::add(const AffineExpr& other, double scale) {
  for (size_t r = 0; r < other.idx.size(); ++r) add(other.idx[r], scale * other.val[r]);
  constant += scale * other.constant;
}

double AffineExpr::eval(const Vector& z) const {
  double s = constant;
  for (size_t r = 0; r < idx.size(); ++r) s += val[r] * z(idx[r]);
  return s;
}

void AffineExpr::compress() {
  std::map<int, double> acc;
  for (size_t r = 0; r < idx.size(); ++r) acc[idx[r]] += val[r];
  idx.clear();
  val.clear();
  for (const auto& [i, v] : acc) {
    if (v != 0.0) add(i, v);
  }
}

std::vector<ParabolicPair> select_pairs(const QcqpInstance& inst, PairPolicy policy) {
  const int n = inst.n();
  std::vector<ParabolicPair> out;
  for (int i = 0; i < n; ++i) out.push_back({i, i, PairSign::kPlus});
  if (policy == PairPolicy::kFull) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        out.push_back({i, j, PairSign::kMinus});
        out.push_back({i, j, PairSign::kPlus});
      }
    }
    return out;
  }
  std::set<std::pair<int, int>> pattern;
  for (int k = 0; k <= inst.num_constraints(); ++k) {
    const SparseMatrix& A = inst.form(k).A();
    for (int col = 0; col < A.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(A, col); it; ++it) {
        const int i = static_cast<int>(std::min(it.row(), it.col()));
        const int j = static_cast<int>(std::max(it.row(), it.col()));
        if (i != j) pattern.insert({i, j});
      }
    }
  }
  for (const auto& [i, j] : pattern) {
    out.push_back({i, j, PairSign::kMinus});
    out.push_back({i, j, PairSign::kPlus});
  }
  return out;
}

PairPolicy default_pair_policy(const QcqpInstance& inst) {
  return inst.n() <= 64 ? PairPolicy::kFull : PairPolicy::kSparsity;
}

RelaxationModel::RelaxationModel(std::shared_ptr<const QcqpInstance> inst,
                                 std::optional<Matrix> anchor, double eta)
    : inst_(std::move(inst)), anchor_(std::move(anchor)), eta_(eta) {
  if (!inst_) throw std::invalid_argument("null instance");
  if (!(eta_ >= 0.0) || !std::isfinite(eta_)) {
    throw std::invalid_argument("penalty eta must be finite and nonnegative");
  }
  if (eta_ > 0.0 && !anchor_) throw std::invalid_argument("eta > 0 requires an anchor point");
  if (anchor_ && (anchor_->rows() != inst_->n() || anchor_->cols() != inst_->m())) {
    throw std::invalid_argument("anchor has wrong dimensions");
  }
  num_vars_ = inst_->n() * inst_->m();
}

int64_t RelaxationModel::key(int i, int j, int n) {
  if (i > j) std::swap(i, j);
  return static_cast<int64_t>(i) * n + j;
}

int RelaxationModel::x_var(int i, int j) const {
  auto it = x_index_.find(key(i, j, inst_->n()));
  return it == x_index_.end() ? -1 : it->second;
}

int RelaxationModel::add_x_var(int i, int j) {
  const int64_t k = key(i, j, inst_->n());
  auto it = x_index_.find(k);
  if (it != x_index_.end()) return it->second;
  const int idx = num_vars_++;
  x_index_.emplace(k, idx);
  x_entries_.push_back({std::min(i, j), std::max(i, j)});
  return idx;
}

int RelaxationModel::num_equality_rows() const {
  return static_cast<int>(std::count_if(rows_.begin(), rows_.end(), [](const LinearRow& r) {
    return r.kind == RowKind::kEquality;
  }));
}

int RelaxationModel::num_inequality_rows() const {
  return static_cast<int>(rows_.size()) - num_equality_rows();
}

Vector RelaxationModel::flatten(const LiftedPoint& p) const {
  const int n = inst_->n();
  const int m = inst_->m();
  if (p.Y.rows() != n || p.Y.cols() != m || p.X.rows() != n || p.X.cols() != n) {
    throw std::invalid_argument("lifted point has wrong dimensions");
  }
  Vector z(num_vars_);
  for (int c = 0; c < m; ++c) {
    for (int i = 0; i < n; ++i) z(y_var(i, c)) = p.Y(i, c);
  }
  for (size_t e = 0; e < x_entries_.size(); ++e) {
    z(n * m + static_cast<int>(e)) = p.X(x_entries_[e].first, x_entries_[e].second);
  }
  return z;
}

LiftedPoint RelaxationModel::lift(const Vector& z) const {
  const int n = inst_->n();
  const int m = inst_->m();
  if (z.size() != num_vars_) throw std::invalid_argument("flat vector has wrong length");
  LiftedPoint p;
  p.Y = Eigen::Map<const Matrix>(z.data(), n, m);
  p.X = p.Y * p.Y.transpose();
  for (size_t e = 0; e < x_entries_.size(); ++e) {
    const auto [i, j] = x_entries_[e];
    p.X(i, j) = z(n * m + static_cast<int>(e));
    p.X(j, i) = p.X(i, j);
  }
  return p;
}

double RelaxationModel::objective_value(const Vector& z) const { return objective_.eval(z); }

Vector RelaxationModel::row_residuals(const Vector& z) const {
  Vector r(rows_.size() + cones_.size());
  int pos = 0;
  for (const auto& row : rows_) {
    if (row.kind == RowKind::kEquality) r(pos++) = row.expr.eval(z);
  }
  for (const auto& row : rows_) {
    if (row.kind == RowKind::kInequality) r(pos++) = row.expr.eval(z);
  }
  for (const auto& cone : cones_) {
    double vv = 0.0;
    for (const auto& e : cone.v) {
      const double x = e.eval(z);
      vv += x * x;
    }
    r(pos++) = cone.t.eval(z) * cone.u.eval(z) - vv;
  }
  return r;
}

AffineExpr RelaxationModel::lifted_expr(const QuadForm& form) {
  AffineExpr e;
  const SparseMatrix& A = form.A();
  for (int col = 0; col < A.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(A, col); it; ++it) {
      const int i = static_cast<int>(it.row());
      const int j = static_cast<int>(it.col());
      if (i > j) continue;
      // tr{AX} counts an off-diagonal entry twice.
      e.add(add_x_var(i, j), i == j ? it.value() : 2.0 * it.value());
    }
  }
  const SparseMatrix& B = form.B();
  for (int col = 0; col < B.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(B, col); it; ++it) {
      e.add(y_var(static_cast<int>(it.row()), col), 2.0 * it.value());
    }
  }
  e.constant = form.c();
  e.compress();
  return e;
}

namespace {

ConeRow pair_cone(RelaxationModel& model, const ParabolicPair& p, int index) {
  const int m = model.instance().m();
  ConeRow cone;
  cone.pair = index;
  cone.u.constant = 1.0;
  if (p.i == p.j) {
    cone.t.add(model.add_x_var(p.i, p.i), 1.0);
    for (int c = 0; c < m; ++c) {
      AffineExpr v;
      v.add(model.y_var(p.i, c), 1.0);
      cone.v.push_back(std::move(v));
    }
    return cone;
  }
  const double s = p.sign == PairSign::kPlus ? 1.0 : -1.0;
  cone.t.add(model.add_x_var(p.i, p.i), 1.0);
  cone.t.add(model.add_x_var(p.j, p.j), 1.0);
  cone.t.add(model.add_x_var(p.i, p.j), 2.0 * s);
  for (int c = 0; c < m; ++c) {
    AffineExpr v;
    v.add(model.y_var(p.i, c), 1.0);
    v.add(model.y_var(p.j, c), s);
    cone.v.push_back(std::move(v));
  }
  return cone;
}

void add_lifted_constraints(RelaxationModel& model) {
  const QcqpInstance& inst = model.instance();
  for (int k = 1; k <= inst.num_constraints(); ++k) {
    LinearRow row;
    row.expr = model.lifted_expr(inst.form(k));
    row.kind = inst.is_equality(k) ? RowKind::kEquality : RowKind::kInequality;
    row.constraint = k;
    model.add_row(std::move(row));
  }
}

}  // namespace

RelaxationModel build_parabolic_model(std::shared_ptr<const QcqpInstance> inst,
                                      const std::vector<ParabolicPair>& pairs,
                                      const std::optional<Matrix>& anchor, double eta) {
  RelaxationModel model(std::move(inst), anchor, eta);
  const int n = model.instance().n();
  const int m = model.instance().m();
  std::set<std::tuple<int, int, int>> seen;
  for (const auto& p : pairs) {
    if (p.i < 0 || p.j >= n || p.i > p.j) {
      throw std::invalid_argument("pair indices out of range or not ordered");
    }
    if (p.i == p.j && p.sign == PairSign::kMinus) {
      throw std::invalid_argument("diagonal pairs carry only the plus sign");
    }
    if (!seen.insert({p.i, p.j, p.sign == PairSign::kPlus ? 1 : 0}).second) {
      throw std::invalid_argument("duplicate pair");
    }
  }
  for (size_t r = 0; r < pairs.size(); ++r) {
    model.add_pair(pairs[r]);
    model.add_cone(pair_cone(model, pairs[r], static_cast<int>(r)));
  }

  add_lifted_constraints(model);
  AffineExpr obj = model.lifted_expr(model.instance().objective());
  if (eta > 0.0) {
    const Matrix& Yc = *anchor;
    for (int i = 0; i < n; ++i) {
      const int xi = model.x_var(i, i);
      if (xi < 0) continue;
      obj.add(xi, eta);
      for (int c = 0; c < m; ++c) obj.add(model.y_var(i, c), -2.0 * eta * Yc(i, c));
      obj.constant += eta * Yc.row(i).squaredNorm();
    }
  }
  obj.compress();
  model.set_objective(std::move(obj));
  return model;
}

RelaxationModel build_parabolic_model(const QcqpInstance& inst,
                                      const std::vector<ParabolicPair>& pairs,
                                      const std::optional<Matrix>& anchor, double eta) {
  return build_parabolic_model(std::make_shared<const QcqpInstance>(inst), pairs, anchor,
                               eta);
}

void add_box_cuts(RelaxationModel& model, const Vector& lower, const Vector& upper) {
  const QcqpInstance& inst = model.instance();
  if (inst.m() != 1) throw std::invalid_argument("box cuts are unsupported for m != 1");
  const int n = inst.n();
  if (lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("bounds must have n entries");
  }
  for (int k = 0; k < n; ++k) {
    const double lb = lower(k);
    const double ub = upper(k);
    if (!(lb <= ub)) throw std::invalid_argument("lower bound exceeds upper bound");
    const int xk = model.add_x_var(k, k);
    const int yk = model.y_var(k, 0);
    const bool lb_ok = std::isfinite(lb);
    const bool ub_ok = std::isfinite(ub);
    if (lb_ok && ub_ok) {
      LinearRow row;
      row.kind = RowKind::kInequality;
      row.cut_variable = k;
      row.cut = BoxCut::kLowerUpper;
      row.expr.add(xk, 1.0);
      row.expr.add(yk, -(lb + ub));
      row.expr.constant = lb * ub;
      model.add_row(std::move(row));
    }
    // X_kk − 2b x_k + b² ≥ 0, stored as −(…) ≤ 0.
    auto tangent = [&](double b, BoxCut cut) {
      LinearRow row;
      row.kind = RowKind::kInequality;
      row.cut_variable = k;
      row.cut = cut;
      row.expr.add(xk, -1.0);
      row.expr.add(yk, 2.0 * b);
      row.expr.constant = -b * b;
      model.add_row(std::move(row));
    };
    if (ub_ok) tangent(ub, BoxCut::kUpperUpper);
    if (lb_ok) tangent(lb, BoxCut::kLowerLower);
    if (!lb_ok || !ub_ok) {
      model.add_warning("variable " + std::to_string(k) +
                        " has an infinite bound; dependent box cuts skipped");
    }
  }
  model.set_box_cuts(true);
}

RelaxationModel build_socp_baseline(std::shared_ptr<const QcqpInstance> inst) {
  RelaxationModel model(std::move(inst), std::nullopt, 0.0);
  const int n = model.instance().n();
  for (int i = 0; i < n; ++i) {
    ParabolicPair p{i, i, PairSign::kPlus};
    model.add_pair(p);
    model.add_cone(pair_cone(model, p, i));
  }
  AffineExpr obj = model.lifted_expr(model.instance().objective());
  model.set_objective(std::move(obj));
  add_lifted_constraints(model);
  // Minor cones for every off-diagonal entry the constraints introduced.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int xij = model.x_var(i, j);
      if (xij < 0) continue;
      ConeRow cone;
      cone.t.add(model.x_var(i, i), 1.0);
      cone.u.add(model.x_var(j, j), 1.0);
      AffineExpr v;
      v.add(xij, 1.0);
      cone.v.push_back(std::move(v));
      model.add_cone(std::move(cone));
    }
  }
  return model;
}

RelaxationModel build_socp_baseline(const QcqpInstance& inst) {
  return build_socp_baseline(std::make_shared<const QcqpInstance>(inst));
}

}  // namespace parabolic
