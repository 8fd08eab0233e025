#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace parabolic {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct MatrixNorms {
  double norm1 = 0.0;  // induced 1-norm (max absolute column sum)
  double norm2 = 0.0;  // spectral norm
};

/// One quadratic function q(Y) = tr{Yᵀ A Y} + 2 tr{Bᵀ Y} + c over Y ∈ ℝ^{n×m}.
///
/// A is stored sparse and exactly symmetric. Input with a relative asymmetry
/// above 1e-12 is rejected; smaller asymmetry is removed by (A + Aᵀ)/2. The
/// induced 1-norm and spectral norm of A are computed once on construction.
class QuadForm {
 public:
  QuadForm(SparseMatrix A, SparseMatrix B, double c);
  QuadForm(const Matrix& A, const Matrix& B, double c);

  static QuadForm Zero(int n, int m);
  // Linear form 2 tr{BᵀY} + c.
  static QuadForm Linear(const Matrix& B, double c);

  int n() const { return static_cast<int>(A_.rows()); }
  int m() const { return static_cast<int>(B_.cols()); }
  const SparseMatrix& A() const { return A_; }
  const SparseMatrix& B() const { return B_; }
  double c() const { return c_; }
  bool is_linear() const { return A_.nonZeros() == 0; }

  double a_norm1() const { return norms_.norm1; }
  double a_norm2() const { return norms_.norm2; }

  Matrix dense_A() const { return Matrix(A_); }
  Matrix dense_B() const { return Matrix(B_); }

 private:
  SparseMatrix A_;
  SparseMatrix B_;
  double c_;
  MatrixNorms norms_;
};

/// Box bounds on the scalar variables (m = 1). Entries may be ±infinity.
struct Bounds {
  Vector lower;
  Vector upper;
};

/// Constraint indices are stable: 0 is the objective, 1..|E| the equalities
/// and |E|+1..|E|+|I| the inequalities.
class QcqpInstance {
 public:
  QcqpInstance(int n, int m, QuadForm objective, std::vector<QuadForm> equalities,
               std::vector<QuadForm> inequalities,
               std::optional<Bounds> bounds = std::nullopt);

  int n() const { return n_; }
  int m() const { return m_; }
  const QuadForm& objective() const { return objective_; }
  const std::vector<QuadForm>& equalities() const { return equalities_; }
  const std::vector<QuadForm>& inequalities() const { return inequalities_; }
  const std::optional<Bounds>& bounds() const { return bounds_; }

  int num_equalities() const { return static_cast<int>(equalities_.size()); }
  int num_inequalities() const { return static_cast<int>(inequalities_.size()); }
  int num_constraints() const { return num_equalities() + num_inequalities(); }

  // k ∈ {0} ∪ E ∪ I.
  const QuadForm& form(int k) const;
  bool is_equality(int k) const { return k >= 1 && k <= num_equalities(); }
  bool is_inequality(int k) const {
    return k > num_equalities() && k <= num_constraints();
  }

 private:
  int n_;
  int m_;
  QuadForm objective_;
  std::vector<QuadForm> equalities_;
  std::vector<QuadForm> inequalities_;
  std::optional<Bounds> bounds_;
};

/// A point of the lifted space: Y together with X standing in for Y Yᵀ.
struct LiftedPoint {
  Matrix Y;
  Matrix X;
};

struct FeasibilityResidual {
  double max_eq_violation = 0.0;
  double max_ineq_violation = 0.0;
  bool is_feasible = true;
};

double eval_q(const QuadForm& form, const Matrix& Y);
Matrix grad_q(const QuadForm& form, const Matrix& Y);
double eval_lifted_q(const QuadForm& form, const LiftedPoint& p);

FeasibilityResidual feasibility_residual(const QcqpInstance& inst, const Matrix& Y,
                                         double tol);

MatrixNorms matrix_norms(const Matrix& A);
MatrixNorms matrix_norms(const SparseMatrix& A);

// tr{X − Y Yᵀ}.
double rank_gap(const LiftedPoint& p);

}  // namespace parabolic
