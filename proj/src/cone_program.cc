#include "parabolic/cone_program.h"

#include <stdexcept>

namespace parabolic {
namespace {

using Triplet = Eigen::Triplet<double>;

void check_indices(const AffineExpr& e, int num_vars) {
  for (int i : e.idx) {
    if (i < 0 || i >= num_vars) {
      throw std::logic_error("model row references an unindexed variable");
    }
  }
}

// Row r of G gets −scale·expr and h gets scale·constant, so that h − Gx = scale·expr(x).
void put_negated(std::vector<Triplet>& trip, Vector& h, int r, const AffineExpr& e,
                 double scale) {
  for (size_t k = 0; k < e.idx.size(); ++k) trip.emplace_back(r, e.idx[k], -scale * e.val[k]);
  h(r) += scale * e.constant;
}

}  // namespace

ConeProgram encode_cone_program(const RelaxationModel& model) {
  const int N = model.num_vars();
  ConeProgram prog;
  prog.c = Vector::Zero(N);
  check_indices(model.objective(), N);
  for (size_t k = 0; k < model.objective().idx.size(); ++k) {
    prog.c(model.objective().idx[k]) += model.objective().val[k];
  }
  prog.c0 = model.objective().constant;

  const int p = model.num_equality_rows();
  const int l = model.num_inequality_rows();
  int cone_rows = 0;
  for (const auto& cone : model.cones()) {
    cone_rows += 2 + static_cast<int>(cone.v.size());
  }

  std::vector<Triplet> a_trip;
  prog.b = Vector::Zero(p);
  std::vector<Triplet> g_trip;
  prog.h = Vector::Zero(l + cone_rows);
  int ra = 0;
  int rg = 0;
  for (const auto& row : model.rows()) {
    check_indices(row.expr, N);
    if (row.kind == RowKind::kEquality) {
      for (size_t k = 0; k < row.expr.idx.size(); ++k) {
        a_trip.emplace_back(ra, row.expr.idx[k], row.expr.val[k]);
      }
      prog.b(ra) = -row.expr.constant;
      prog.eq_constraint.push_back(row.constraint);
      ++ra;
    }
  }
  for (const auto& row : model.rows()) {
    if (row.kind == RowKind::kInequality) {
      // expr ≤ 0 ⇔ s = −expr ≥ 0.
      put_negated(g_trip, prog.h, rg, row.expr, -1.0);
      prog.ineq_constraint.push_back(row.constraint);
      ++rg;
    }
  }
  prog.num_nonneg = l;
  for (const auto& cone : model.cones()) {
    check_indices(cone.t, N);
    check_indices(cone.u, N);
    put_negated(g_trip, prog.h, rg, cone.t, 1.0);
    put_negated(g_trip, prog.h, rg, cone.u, 1.0);
    put_negated(g_trip, prog.h, rg + 1, cone.t, 1.0);
    put_negated(g_trip, prog.h, rg + 1, cone.u, -1.0);
    for (size_t c = 0; c < cone.v.size(); ++c) {
      check_indices(cone.v[c], N);
      put_negated(g_trip, prog.h, rg + 2 + static_cast<int>(c), cone.v[c], 2.0);
    }
    const int dim = 2 + static_cast<int>(cone.v.size());
    prog.soc_dims.push_back(dim);
    prog.cone_pair.push_back(cone.pair);
    rg += dim;
  }
  prog.A.resize(p, N);
  prog.A.setFromTriplets(a_trip.begin(), a_trip.end());
  prog.A.prune(0.0);
  prog.G.resize(l + cone_rows, N);
  prog.G.setFromTriplets(g_trip.begin(), g_trip.end());
  prog.G.prune(0.0);
  return prog;
}

Vector cone_residuals(const ConeProgram& prog, const Vector& x) {
  if (x.size() != prog.num_vars()) throw std::invalid_argument("vector has wrong length");
  const Vector ra = prog.A * x - prog.b;
  const Vector s = prog.h - prog.G * x;
  Vector out(prog.num_eq() + prog.num_nonneg + prog.num_soc());
  out.head(prog.num_eq()) = ra;
  out.segment(prog.num_eq(), prog.num_nonneg) = -s.head(prog.num_nonneg);
  int off = prog.num_nonneg;
  for (int k = 0; k < prog.num_soc(); ++k) {
    const int q = prog.soc_dims[k];
    const double s0 = s(off);
    const double tail = s.segment(off + 1, q - 1).squaredNorm();
    out(prog.num_eq() + prog.num_nonneg + k) = 0.25 * (s0 * s0 - tail);
    off += q;
  }
  return out;
}

}  // namespace parabolic
