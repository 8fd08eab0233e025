#include "parabolic/conic_solver.h"

#include <gtest/gtest.h>

#include "parabolic/cone_program.h"
#include "parabolic/relaxation.h"
#include "support.h"

namespace parabolic {
namespace {

using testing::Rng;

// Hand-assembled program in the variables (t, y):
// minimize y  s.t.  t ≤ 1,  ‖y‖² ≤ t·1.
ConeProgram parabola_program() {
  ConeProgram p;
  p.c = Vector(2);
  p.c << 0.0, 1.0;
  p.A.resize(0, 2);
  p.b.resize(0);
  std::vector<Eigen::Triplet<double>> trip = {{0, 0, 1.0}, {1, 0, -1.0}, {2, 0, -1.0},
                                              {3, 1, -2.0}};
  p.G.resize(4, 2);
  p.G.setFromTriplets(trip.begin(), trip.end());
  p.h = Vector(4);
  p.h << 1.0, 1.0, -1.0, 0.0;
  p.num_nonneg = 1;
  p.soc_dims = {3};
  p.ineq_constraint = {-1};
  p.cone_pair = {-1};
  return p;
}

TEST(ConicSolverTest, ParabolaMinimum) {
  ConeSolution sol = solve_cone_program(parabola_program());
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  EXPECT_NEAR(sol.x(1), -1.0, 1e-7);
  EXPECT_NEAR(sol.x(0), 1.0, 1e-7);
  EXPECT_NEAR(sol.objective, -1.0, 1e-8);
}

TEST(ConicSolverTest, SettingsValidation) {
  SolverSettings bad;
  bad.tol_feas = 0.0;
  EXPECT_THROW(solve_cone_program(parabola_program(), bad), std::invalid_argument);
  bad = SolverSettings{};
  bad.max_iter = 0;
  EXPECT_THROW(solve_cone_program(parabola_program(), bad), std::invalid_argument);
}

TEST(ConicSolverTest, NtScalingIdentity) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int q = testing::uniform_int(rng, 1, 6);
    Vector s = testing::random_matrix(rng, q, 1);
    Vector z = testing::random_matrix(rng, q, 1);
    s(0) = (q > 1 ? s.tail(q - 1).norm() : 0.0) + testing::uniform(rng, 0.01, 2.0);
    z(0) = (q > 1 ? z.tail(q - 1).norm() : 0.0) + testing::uniform(rng, 0.01, 2.0);
    SocScaling W = soc_nt_scaling(s, z);
    const Vector lam1 = W.apply(z);
    const Vector lam2 = W.apply_inverse(s);
    EXPECT_LT((lam1 - lam2).norm(), 1e-10 * (1.0 + lam1.norm()));
    const Vector v = testing::random_matrix(rng, q, 1);
    EXPECT_LT((W.apply_inverse(W.apply(v)) - v).norm(), 1e-10 * (1.0 + v.norm()));
    EXPECT_LT((W.squared() * v - W.apply(W.apply(v))).norm(), 1e-10 * (1.0 + v.norm()));
  }
}

TEST(ConicSolverTest, ConvexScalarRelaxationIsExact) {
  // minimize x² s.t. −x + 1 ≤ 0.
  Matrix A = Matrix::Ones(1, 1);
  Matrix B = Matrix::Zero(1, 1);
  Matrix Bc(1, 1);
  Bc << -0.5;
  QcqpInstance inst(1, 1, QuadForm(A, B, 0.0), {}, {QuadForm::Linear(Bc, 1.0)});
  auto model = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull), std::nullopt,
                                     0.0);
  ConeProgram prog = encode_cone_program(model);
  ConeSolution sol = solve_cone_program(prog);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  EXPECT_NEAR(sol.objective, 1.0, 1e-7);
  LiftedPoint p = model.lift(sol.x);
  EXPECT_NEAR(p.Y(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(p.X(0, 0), 1.0, 1e-6);
}

TEST(ConicSolverTest, RandomConvexQpsMatchActiveSetOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = testing::uniform_int(rng, 1, 8);
    const int r = testing::uniform_int(rng, 0, 6);
    // Diagonal dominance keeps the relaxation bounded and exact.
    Matrix Q = testing::random_symmetric(rng, n);
    for (int i = 0; i < n; ++i) {
      Q(i, i) = Q.row(i).cwiseAbs().sum() - std::abs(Q(i, i)) + testing::uniform(rng, 0.1, 1.0);
    }
    const Vector q = testing::random_matrix(rng, n, 1);
    const Matrix C = testing::random_matrix(rng, r, n);
    // Feasible at the origin.
    Vector d(r);
    for (int i = 0; i < r; ++i) d(i) = testing::uniform(rng, 0.1, 1.0);
    std::vector<QuadForm> ineq;
    for (int i = 0; i < r; ++i) ineq.push_back(QuadForm::Linear(0.5 * C.row(i).transpose(), -d(i)));
    QcqpInstance inst(n, 1, QuadForm(Q, Matrix(q), 0.0), {}, ineq);
    auto model = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull),
                                       std::nullopt, 0.0);
    ConeSolution sol = solve_cone_program(encode_cone_program(model));
    ASSERT_EQ(sol.status, SolveStatus::kOptimal) << "trial " << trial;
    auto oracle = testing::convex_qp_enumerate(Q, q, C, d);
    ASSERT_TRUE(oracle.has_value());
    EXPECT_NEAR(sol.objective, *oracle, 1e-6 * std::max(1.0, std::abs(*oracle)))
        << "trial " << trial;
  }
}

TEST(ConicSolverTest, DetectsInfeasibility) {
  // x ≥ 1 and x ≤ 0.
  Matrix b1(1, 1), b2(1, 1);
  b1 << -0.5;
  b2 << 0.5;
  QcqpInstance inst(1, 1, QuadForm::Zero(1, 1), {},
                    {QuadForm::Linear(b1, 1.0), QuadForm::Linear(b2, 0.0)});
  auto model = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull), std::nullopt,
                                     0.0);
  ConeSolution sol = solve_cone_program(encode_cone_program(model));
  EXPECT_EQ(sol.status, SolveStatus::kInfeasible);
}

TEST(ConicSolverTest, DetectsUnboundedness) {
  // minimize −x²: the lifted objective −X has the ray X → ∞.
  QcqpInstance inst(1, 1, QuadForm(-Matrix::Ones(1, 1), Matrix::Zero(1, 1), 0.0), {}, {});
  auto model = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull), std::nullopt,
                                     0.0);
  ConeSolution sol = solve_cone_program(encode_cone_program(model));
  EXPECT_EQ(sol.status, SolveStatus::kUnbounded);
}

TEST(ConicSolverTest, DeterministicAndWeakDuality) {
  Rng rng(5);
  testing::RandomSpec spec;
  spec.n = 4;
  spec.num_eq = 1;
  spec.num_ineq = 2;
  spec.box = 2.0;
  for (int trial = 0; trial < 10; ++trial) {
    auto ri = testing::random_instance(rng, spec);
    auto model = build_parabolic_model(ri.inst, select_pairs(*ri.inst, PairPolicy::kFull),
                                       std::nullopt, 0.0);
    add_box_cuts(model, ri.inst->bounds()->lower, ri.inst->bounds()->upper);
    ConeProgram prog = encode_cone_program(model);
    ConeSolution a = solve_cone_program(prog);
    ConeSolution b = solve_cone_program(prog);
    ASSERT_EQ(a.status, SolveStatus::kOptimal);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_TRUE((a.x.array() == b.x.array()).all());
    EXPECT_TRUE((a.z.array() == b.z.array()).all());
    EXPECT_LE(a.dual_objective, a.objective + 1e-8 * std::max(1.0, std::abs(a.objective)));
    for (int r = 0; r < prog.num_nonneg; ++r) EXPECT_GE(a.z(r), -1e-8);
  }
}

TEST(ExtractDualsTest, EqualityMultiplierMatchesClosedForm) {
  // minimize ‖x‖² + 2gᵀx s.t. 2aᵀx − β = 0 (n = 3); the relaxation is exact.
  // KKT: 2x + 2g + 2τa = 0, 2aᵀx = β  ⇒  τ = −(β/2 + aᵀg)/aᵀa.
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector g = testing::random_matrix(rng, 3, 1);
    const Vector a = testing::random_matrix(rng, 3, 1);
    const double beta = testing::uniform(rng, -1, 1);
    QcqpInstance inst(3, 1, QuadForm(Matrix::Identity(3, 3), Matrix(g), 0.0),
                      {QuadForm::Linear(Matrix(a), -beta)}, {});
    auto model = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull),
                                       std::nullopt, 0.0);
    ConeProgram prog = encode_cone_program(model);
    // The off-diagonal pair rows are degenerate, so primal and dual accuracy
    // scale like the square root of the gap; solve tighter than the default.
    SolverSettings tight;
    tight.tol_feas = tight.tol_gap = 1e-11;
    ConeSolution sol = solve_cone_program(prog, tight);
    ASSERT_EQ(sol.status, SolveStatus::kOptimal);
    Multipliers mult = extract_duals(sol, model, prog);
    const double tau = -(beta / 2.0 + a.dot(g)) / a.squaredNorm();
    EXPECT_NEAR(mult.tau.at(1), tau, 1e-6);
    EXPECT_LT((mult.Lambda - Matrix::Identity(3, 3)).norm(), 1e-12);
  }
}

TEST(ExtractDualsTest, UnconstrainedModel) {
  Rng rng(2);
  const Matrix A0 = testing::random_psd(rng, 3);
  const Matrix Yc = testing::random_matrix(rng, 3, 2);
  QcqpInstance inst(3, 2, QuadForm(A0, testing::random_matrix(rng, 3, 2), 0.0), {}, {});
  auto model = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull), Yc, 2.0);
  ConeProgram prog = encode_cone_program(model);
  ConeSolution sol = solve_cone_program(prog);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  Multipliers mult = extract_duals(sol, model, prog);
  EXPECT_TRUE(mult.tau.empty());
  EXPECT_LT((mult.Lambda - (2.0 * Matrix::Identity(3, 3) + A0)).norm(), 1e-12);
}

TEST(ExtractDualsTest, NonOptimalIsUnavailable) {
  ConeSolution sol;
  sol.status = SolveStatus::kMaxIter;
  QcqpInstance inst(1, 1, QuadForm::Zero(1, 1), {}, {});
  auto model = build_parabolic_model(inst, select_pairs(inst, PairPolicy::kFull), std::nullopt,
                                     0.0);
  EXPECT_THROW(extract_duals(sol, model, encode_cone_program(model)), std::runtime_error);
}

}  // namespace
}  // namespace parabolic
