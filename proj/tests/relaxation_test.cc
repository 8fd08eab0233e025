#include "parabolic/relaxation.h"

#include <set>

#include <gtest/gtest.h>

#include "parabolic/cone_program.h"
#include "parabolic/conic_solver.h"
#include "support.h"

namespace parabolic {
namespace {

using testing::Rng;

std::set<std::tuple<int, int, int>> as_set(const std::vector<ParabolicPair>& pairs) {
  std::set<std::tuple<int, int, int>> s;
  for (const auto& p : pairs) s.insert({p.i, p.j, p.sign == PairSign::kPlus ? 1 : 0});
  return s;
}

// Minimizes x² subject to −x + 1 ≤ 0.
QcqpInstance scalar_instance() {
  Matrix b(1, 1);
  b << -0.5;
  return QcqpInstance(1, 1, QuadForm(Matrix::Ones(1, 1), Matrix::Zero(1, 1), 0.0), {},
                      {QuadForm::Linear(b, 1.0)});
}

TEST(SelectPairsTest, FullEnumeration) {
  QcqpInstance inst(2, 1, QuadForm::Zero(2, 1), {}, {});
  const auto pairs = select_pairs(inst, PairPolicy::kFull);
  const std::set<std::tuple<int, int, int>> expect = {{0, 0, 1}, {1, 1, 1}, {0, 1, 0}, {0, 1, 1}};
  EXPECT_EQ(as_set(pairs), expect);
  EXPECT_EQ(pairs.size(), 4u);
}

TEST(SelectPairsTest, DiagonalFormsGiveDiagonalPairs) {
  Rng rng(1);
  Vector d = testing::random_matrix(rng, 4, 1);
  QcqpInstance inst(4, 1, QuadForm(Matrix(d.asDiagonal()), Matrix::Zero(4, 1), 0.0),
                    {QuadForm(Matrix::Identity(4, 4), Matrix::Zero(4, 1), -1.0)}, {});
  const auto pairs = select_pairs(inst, PairPolicy::kSparsity);
  ASSERT_EQ(pairs.size(), 4u);
  for (const auto& p : pairs) EXPECT_EQ(p.i, p.j);
}

TEST(SelectPairsTest, SparsityMatchesPatternScan) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 6;
    std::vector<QuadForm> ineq;
    std::set<std::pair<int, int>> oracle;
    for (int k = 0; k < 3; ++k) {
      Matrix A = Matrix::Zero(n, n);
      const int i = testing::uniform_int(rng, 0, n - 1);
      const int j = testing::uniform_int(rng, 0, n - 1);
      A(i, j) = A(j, i) = 1.0;
      if (i != j) oracle.insert({std::min(i, j), std::max(i, j)});
      ineq.emplace_back(A, Matrix::Zero(n, 1), -1.0);
    }
    QcqpInstance inst(n, 1, QuadForm::Zero(n, 1), {}, ineq);
    std::set<std::tuple<int, int, int>> expect;
    for (int i = 0; i < n; ++i) expect.insert({i, i, 1});
    for (auto [i, j] : oracle) {
      expect.insert({i, j, 0});
      expect.insert({i, j, 1});
    }
    EXPECT_EQ(as_set(select_pairs(inst, PairPolicy::kSparsity)), expect);
  }
}

TEST(BuildModelTest, Validation) {
  QcqpInstance inst = scalar_instance();
  const auto pairs = select_pairs(inst, PairPolicy::kFull);
  EXPECT_THROW(build_parabolic_model(inst, pairs, std::nullopt, 1.0), std::invalid_argument);
  EXPECT_THROW(build_parabolic_model(inst, pairs, Matrix::Zero(1, 1), -1.0),
               std::invalid_argument);
  EXPECT_THROW(build_parabolic_model(inst, pairs, Matrix::Zero(2, 1), 1.0),
               std::invalid_argument);
  EXPECT_THROW(build_parabolic_model(inst, {{0, 0, PairSign::kMinus}}, std::nullopt, 0.0),
               std::invalid_argument);
  EXPECT_THROW(build_parabolic_model(inst, {{0, 0, PairSign::kPlus}, {0, 0, PairSign::kPlus}},
                                     std::nullopt, 0.0),
               std::invalid_argument);
}

TEST(BuildModelTest, UnpenalizedObjectiveIsLiftedObjective) {
  Rng rng(3);
  testing::RandomSpec spec;
  spec.n = 4;
  spec.m = 2;
  auto ri = testing::random_instance(rng, spec);
  auto model = build_parabolic_model(ri.inst, select_pairs(*ri.inst, PairPolicy::kFull),
                                     std::nullopt, 0.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix Y = testing::random_matrix(rng, 4, 2);
    const Matrix R = testing::random_matrix(rng, 4, 4);
    LiftedPoint p{Y, R + R.transpose()};
    EXPECT_NEAR(model.objective_value(model.flatten(p)),
                eval_lifted_q(ri.inst->objective(), p), 1e-12);
  }
}

TEST(BuildModelTest, PenaltyVanishesAtAnchorAndBoundsDistance) {
  Rng rng(4);
  testing::RandomSpec spec;
  spec.n = 4;
  spec.m = 2;
  auto ri = testing::random_instance(rng, spec);
  const Matrix Yc = testing::random_matrix(rng, 4, 2);
  const double eta = 1.0;
  auto model = build_parabolic_model(ri.inst, select_pairs(*ri.inst, PairPolicy::kFull), Yc, eta);
  LiftedPoint at{Yc, Yc * Yc.transpose()};
  EXPECT_NEAR(model.objective_value(model.flatten(at)), eval_lifted_q(ri.inst->objective(), at),
              1e-12);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix Y = testing::random_matrix(rng, 4, 2);
    const Vector d = testing::random_matrix(rng, 4, 1).cwiseAbs();
    LiftedPoint p{Y, Y * Y.transpose() + Matrix(d.asDiagonal())};
    const double penalty =
        model.objective_value(model.flatten(p)) - eval_lifted_q(ri.inst->objective(), p);
    EXPECT_NEAR(penalty, (Y - Yc).squaredNorm() + d.sum(), 1e-10);
    EXPECT_GE(penalty, (Y - Yc).squaredNorm() - 1e-12);
  }
}

TEST(BuildModelTest, PairRowsMatchDirectEvaluation) {
  Rng rng(5);
  testing::RandomSpec spec;
  spec.n = 5;
  spec.m = 2;
  auto ri = testing::random_instance(rng, spec);
  auto model = build_parabolic_model(ri.inst, select_pairs(*ri.inst, PairPolicy::kFull),
                                     std::nullopt, 0.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix Y = testing::random_matrix(rng, 5, 2);
    const Matrix R = testing::random_matrix(rng, 5, 5);
    const Matrix X = Y * Y.transpose() + R * R.transpose();
    const Vector res = model.row_residuals(model.flatten({Y, X}));
    const int offset = static_cast<int>(model.rows().size());
    for (size_t c = 0; c < model.pairs().size(); ++c) {
      const auto& p = model.pairs()[c];
      const double s = p.sign == PairSign::kPlus ? 1.0 : -1.0;
      double direct;
      if (p.i == p.j) {
        direct = X(p.i, p.i) - Y.row(p.i).squaredNorm();
      } else {
        direct = X(p.i, p.i) + X(p.j, p.j) + 2.0 * s * X(p.i, p.j) -
                 (Y.row(p.i) + s * Y.row(p.j)).squaredNorm();
      }
      EXPECT_NEAR(res(offset + static_cast<int>(c)), direct, 1e-12);
      // X − YYᵀ is PSD here, so every pair row holds.
      EXPECT_GE(direct, -1e-9);
    }
  }
}

TEST(BuildModelTest, LiftedFeasiblePointsSatisfyEveryRow) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    testing::RandomSpec spec;
    spec.n = testing::uniform_int(rng, 1, 5);
    spec.m = testing::uniform_int(rng, 1, 2);
    spec.num_eq = 1;
    spec.num_ineq = 2;
    auto ri = testing::random_instance(rng, spec);
    auto model = build_parabolic_model(ri.inst, select_pairs(*ri.inst, PairPolicy::kFull),
                                       std::nullopt, 0.0);
    const Matrix& Y = ri.feasible;
    const Vector res = model.row_residuals(model.flatten({Y, Y * Y.transpose()}));
    int pos = 0;
    for (int r = 0; r < model.num_equality_rows(); ++r) EXPECT_NEAR(res(pos++), 0.0, 1e-9);
    for (int r = 0; r < model.num_inequality_rows(); ++r) EXPECT_LE(res(pos++), 1e-9);
    for (size_t c = 0; c < model.cones().size(); ++c) EXPECT_GE(res(pos++), -1e-9);
  }
}

TEST(BoxCutsTest, Evaluation) {
  QcqpInstance inst(1, 1, QuadForm::Zero(1, 1), {}, {});
  auto model = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull), std::nullopt,
                                     0.0);
  add_box_cuts(model, Vector::Zero(1), Vector::Ones(1));
  EXPECT_TRUE(model.has_box_cuts());
  ASSERT_EQ(model.num_inequality_rows(), 3);
  Matrix Y(1, 1);
  Y << 0.5;
  Matrix X(1, 1);
  X << 0.25;
  Vector res = model.row_residuals(model.flatten({Y, X}));
  for (int r = 0; r < 3; ++r) EXPECT_LE(res(r), 1e-15);

  auto wide = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull), std::nullopt,
                                    0.0);
  add_box_cuts(wide, -Vector::Ones(1), Vector::Ones(1));
  Y << 0.0;
  X << 2.0;
  res = wide.row_residuals(wide.flatten({Y, X}));
  EXPECT_DOUBLE_EQ(res(0), 1.0);
}

TEST(BoxCutsTest, DegenerateBoxPinsTheVariable) {
  // On [a, a] the tangent cuts and the upper cut give X = 2a·x − a², and the
  // diagonal pair then forces (x − a)² ≤ 0.
  const double a = 0.7;
  QcqpInstance inst(1, 1, QuadForm::Zero(1, 1), {}, {});
  auto model = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull), std::nullopt,
                                     0.0);
  add_box_cuts(model, Vector::Constant(1, a), Vector::Constant(1, a));
  Matrix Y(1, 1), X(1, 1);
  Y << a;
  X << a * a;
  Vector res = model.row_residuals(model.flatten({Y, X}));
  EXPECT_NEAR(res.head(3).lpNorm<Eigen::Infinity>(), 0.0, 1e-15);
  EXPECT_NEAR(res(3), 0.0, 1e-15);
  for (double x : {a - 0.1, a + 0.05}) {
    Y << x;
    X << 2.0 * a * x - a * a;
    res = model.row_residuals(model.flatten({Y, X}));
    EXPECT_LT(res(3), 0.0);  // the diagonal pair fails
  }

  // A box of small but positive width keeps the solver in its interior; the
  // maximizer of x + X must sit at the box.
  const double w = 1e-4;
  Matrix B(1, 1);
  B << -0.5;
  QcqpInstance obj(1, 1, QuadForm(-Matrix::Ones(1, 1), B, 0.0), {}, {});
  auto narrow = build_parabolic_model(obj, select_pairs(obj, PairPolicy::kFull), std::nullopt,
                                      0.0);
  add_box_cuts(narrow, Vector::Constant(1, a - w), Vector::Constant(1, a + w));
  auto r = solve_relaxation(narrow);
  ASSERT_EQ(r.solution.status, SolveStatus::kOptimal);
  EXPECT_NEAR(r.point.Y(0, 0), a, 2.0 * w);
  EXPECT_NEAR(r.point.X(0, 0), a * a, 4.0 * w);
}

TEST(BoxCutsTest, Errors) {
  QcqpInstance two(1, 2, QuadForm::Zero(1, 2), {}, {});
  auto model = build_parabolic_model(two, select_pairs(two, PairPolicy::kFull), std::nullopt,
                                     0.0);
  EXPECT_THROW(add_box_cuts(model, Vector::Zero(1), Vector::Ones(1)), std::invalid_argument);

  QcqpInstance one(1, 1, QuadForm::Zero(1, 1), {}, {});
  auto half = build_parabolic_model(one, select_pairs(one, PairPolicy::kFull), std::nullopt,
                                    0.0);
  add_box_cuts(half, Vector::Zero(1),
               Vector::Constant(1, std::numeric_limits<double>::infinity()));
  EXPECT_EQ(half.num_inequality_rows(), 1);
  EXPECT_EQ(half.warnings().size(), 1u);
}

TEST(EncodeTest, ScalarDiagonalPair) {
  QcqpInstance inst(1, 1, QuadForm::Zero(1, 1), {}, {});
  auto model = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull), std::nullopt,
                                     0.0);
  ConeProgram prog = encode_cone_program(model);
  EXPECT_EQ(prog.num_eq(), 0);
  EXPECT_EQ(prog.num_nonneg, 0);
  ASSERT_EQ(prog.soc_dims, std::vector<int>{3});
  EXPECT_EQ(prog.cone_pair, std::vector<int>{0});
}

TEST(EncodeTest, ConeCounts) {
  // Three equalities, two inequalities and four pairs (n = 2 full).
  std::vector<QuadForm> eq(3, QuadForm(Matrix::Identity(2, 2), Matrix::Zero(2, 1), -1.0));
  std::vector<QuadForm> ineq(2, QuadForm(Matrix::Identity(2, 2), Matrix::Zero(2, 1), -2.0));
  QcqpInstance inst(2, 1, QuadForm::Zero(2, 1), eq, ineq);
  auto model = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull), std::nullopt,
                                     0.0);
  ConeProgram prog = encode_cone_program(model);
  EXPECT_EQ(prog.num_eq(), 3);
  EXPECT_EQ(prog.num_nonneg, 2);
  EXPECT_EQ(prog.num_soc(), 4);
}

TEST(EncodeTest, ResidualsRoundTrip) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    testing::RandomSpec spec;
    spec.n = testing::uniform_int(rng, 1, 5);
    spec.m = testing::uniform_int(rng, 1, 3);
    spec.num_eq = testing::uniform_int(rng, 0, 2);
    spec.num_ineq = testing::uniform_int(rng, 0, 3);
    auto ri = testing::random_instance(rng, spec);
    const Matrix Yc = testing::random_matrix(rng, spec.n, spec.m);
    auto model = trial % 3 == 0 ? build_socp_baseline(ri.inst)
                                : build_parabolic_model(ri.inst,
                                                        select_pairs(*ri.inst, PairPolicy::kFull),
                                                        Yc, 0.5 * trial);
    ConeProgram prog = encode_cone_program(model);
    const Vector z = testing::random_matrix(rng, model.num_vars(), 1);
    const Vector direct = model.row_residuals(z);
    const Vector encoded = cone_residuals(prog, z);
    ASSERT_EQ(direct.size(), encoded.size());
    for (int r = 0; r < direct.size(); ++r) {
      EXPECT_NEAR(encoded(r), direct(r), 1e-12 * std::max(1.0, std::abs(direct(r))));
    }
    EXPECT_NEAR(prog.c.dot(z) + prog.c0, model.objective_value(z), 1e-12);
  }
}

TEST(BaselineTest, LiftedFeasiblePointsSatisfyRows) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    testing::RandomSpec spec;
    spec.n = testing::uniform_int(rng, 1, 5);
    auto ri = testing::random_instance(rng, spec);
    auto model = build_socp_baseline(ri.inst);
    const Matrix& Y = ri.feasible;
    const Vector res = model.row_residuals(model.flatten({Y, Y * Y.transpose()}));
    int pos = 0;
    for (int r = 0; r < model.num_equality_rows(); ++r) EXPECT_NEAR(res(pos++), 0.0, 1e-9);
    for (int r = 0; r < model.num_inequality_rows(); ++r) EXPECT_LE(res(pos++), 1e-9);
    for (size_t c = 0; c < model.cones().size(); ++c) EXPECT_GE(res(pos++), -1e-9);
  }
}

TEST(BaselineTest, ScalarCaseMatchesParabolic) {
  QcqpInstance inst = scalar_instance();
  auto a = solve_relaxation(build_socp_baseline(inst));
  auto b = solve_relaxation(
      build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull), std::nullopt, 0.0));
  ASSERT_EQ(a.solution.status, SolveStatus::kOptimal);
  ASSERT_EQ(b.solution.status, SolveStatus::kOptimal);
  EXPECT_NEAR(a.value, b.value, 1e-7);
  EXPECT_NEAR(a.value, 1.0, 1e-7);
}

TEST(BaselineTest, LowerBoundsLocalOptimum) {
  Rng rng(9);
  int solved = 0;
  for (int trial = 0; trial < 20; ++trial) {
    testing::RandomSpec spec;
    spec.n = testing::uniform_int(rng, 2, 5);
    spec.num_eq = 0;
    spec.num_ineq = 2;
    spec.box = 2.0;
    auto ri = testing::random_instance(rng, spec);
    auto model = build_socp_baseline(ri.inst);
    // Without the cuts an indefinite objective leaves X unbounded.
    add_box_cuts(model, ri.inst->bounds()->lower, ri.inst->bounds()->upper);
    auto r = solve_relaxation(model);
    ASSERT_EQ(r.solution.status, SolveStatus::kOptimal) << "trial " << trial;
    auto best = testing::multistart_minimum(*ri.inst, rng, 10, {ri.feasible}, 2.0);
    ASSERT_TRUE(std::isfinite(best.objective));
    EXPECT_LE(r.value, best.objective + 1e-6) << "trial " << trial;
    ++solved;
  }
  EXPECT_EQ(solved, 20);
}

TEST(RelaxationPropertyTest, SoundnessAndPolicyNesting) {
  Rng rng(10);
  for (int trial = 0; trial < 15; ++trial) {
    testing::RandomSpec spec;
    spec.n = testing::uniform_int(rng, 2, 5);
    spec.num_eq = 0;
    spec.num_ineq = 2;
    spec.box = 2.0;
    auto ri = testing::random_instance(rng, spec);
    auto full = build_parabolic_model(ri.inst, select_pairs(*ri.inst, PairPolicy::kFull),
                                      std::nullopt, 0.0);
    auto sparse = build_parabolic_model(ri.inst, select_pairs(*ri.inst, PairPolicy::kSparsity),
                                        std::nullopt, 0.0);
    add_box_cuts(full, ri.inst->bounds()->lower, ri.inst->bounds()->upper);
    add_box_cuts(sparse, ri.inst->bounds()->lower, ri.inst->bounds()->upper);
    auto rf = solve_relaxation(full);
    auto rs = solve_relaxation(sparse);
    ASSERT_EQ(rf.solution.status, SolveStatus::kOptimal);
    ASSERT_EQ(rs.solution.status, SolveStatus::kOptimal);
    EXPECT_GE(rf.value, rs.value - 1e-8 * std::max(1.0, std::abs(rs.value)));
    auto best = testing::multistart_minimum(*ri.inst, rng, 10, {ri.feasible}, 2.0);
    EXPECT_LE(rf.value, best.objective + 1e-6);
  }
}

}  // namespace
}  // namespace parabolic
