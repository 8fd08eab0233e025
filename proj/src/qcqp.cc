#include "parabolic/qcqp.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace parabolic {
namespace {

constexpr double kAsymmetryTol = 1e-12;
constexpr int kDenseEigenLimit = 1500;

void check_finite(const SparseMatrix& A, const char* what) {
  for (int k = 0; k < A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
      if (!std::isfinite(it.value())) {
        throw std::invalid_argument(std::string(what) + " has non-finite entries");
      }
    }
  }
}

SparseMatrix symmetrized(const SparseMatrix& A) {
  if (A.rows() != A.cols()) {
    throw std::invalid_argument("quadratic matrix must be square");
  }
  check_finite(A, "quadratic matrix");
  SparseMatrix At = A.transpose();
  SparseMatrix diff = A - At;
  double asym = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
      asym = std::max(asym, std::abs(it.value()));
    }
  }
  double scale = 0.0;
  for (int k = 0; k < A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
      scale = std::max(scale, std::abs(it.value()));
    }
  }
  if (asym > kAsymmetryTol * scale) {
    throw std::invalid_argument("quadratic matrix is not symmetric (relative asymmetry " +
                                std::to_string(asym / scale) + ")");
  }
  SparseMatrix S = 0.5 * (A + At);
  S.prune(0.0);
  S.makeCompressed();
  return S;
}

double power_iteration_norm(const SparseMatrix& A) {
  Vector v = Vector::Ones(A.rows()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    Vector w = A * (A * v);
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    double next = std::sqrt(nw);
    v = w / nw;
    if (std::abs(next - lambda) <= 1e-13 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

}  // namespace

MatrixNorms matrix_norms(const SparseMatrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("matrix must be square");
  check_finite(A, "matrix");
  MatrixNorms out;
  std::set<int> support;
  for (int k = 0; k < A.outerSize(); ++k) {
    double col = 0.0;
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
      col += std::abs(it.value());
      support.insert(static_cast<int>(it.row()));
      support.insert(static_cast<int>(it.col()));
    }
    out.norm1 = std::max(out.norm1, col);
  }
  if (support.empty()) return out;
  // Eigenvalues of A are those of its restriction to the nonzero support plus zeros.
  const int s = static_cast<int>(support.size());
  if (s <= kDenseEigenLimit) {
    std::vector<int> local(A.rows(), -1);
    int idx = 0;
    for (int r : support) local[r] = idx++;
    Matrix sub = Matrix::Zero(s, s);
    for (int k = 0; k < A.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
        sub(local[it.row()], local[it.col()]) = it.value();
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sub, Eigen::EigenvaluesOnly);
    out.norm2 = eig.eigenvalues().cwiseAbs().maxCoeff();
  } else {
    out.norm2 = power_iteration_norm(A);
  }
  return out;
}

MatrixNorms matrix_norms(const Matrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("matrix must be square");
  if (!A.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
  const double scale = A.cwiseAbs().maxCoeff();
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > kAsymmetryTol * std::max(scale, 1e-300)) {
    throw std::invalid_argument("matrix is not symmetric");
  }
  MatrixNorms out;
  if (A.size() == 0) return out;
  out.norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  out.norm2 = eig.eigenvalues().cwiseAbs().maxCoeff();
  return out;
}

QuadForm::QuadForm(SparseMatrix A, SparseMatrix B, double c)
    : A_(symmetrized(A)), B_(std::move(B)), c_(c) {
  if (B_.rows() != A_.rows()) {
    throw std::invalid_argument("B must have as many rows as A");
  }
  if (!std::isfinite(c_)) throw std::invalid_argument("constant term is not finite");
  check_finite(B_, "linear matrix");
  B_.prune(0.0);
  B_.makeCompressed();
  norms_ = matrix_norms(A_);
}

QuadForm::QuadForm(const Matrix& A, const Matrix& B, double c)
    : QuadForm(SparseMatrix(A.sparseView()), SparseMatrix(B.sparseView()), c) {}

QuadForm QuadForm::Zero(int n, int m) {
  return QuadForm(SparseMatrix(n, n), SparseMatrix(n, m), 0.0);
}

QuadForm QuadForm::Linear(const Matrix& B, double c) {
  return QuadForm(SparseMatrix(B.rows(), B.rows()), SparseMatrix(B.sparseView()), c);
}

QcqpInstance::QcqpInstance(int n, int m, QuadForm objective,
                           std::vector<QuadForm> equalities,
                           std::vector<QuadForm> inequalities,
                           std::optional<Bounds> bounds)
    : n_(n),
      m_(m),
      objective_(std::move(objective)),
      equalities_(std::move(equalities)),
      inequalities_(std::move(inequalities)),
      bounds_(std::move(bounds)) {
  if (n_ <= 0 || m_ <= 0) throw std::invalid_argument("n and m must be positive");
  auto check = [&](const QuadForm& f, const char* what) {
    if (f.n() != n_ || f.m() != m_) {
      throw std::invalid_argument(std::string(what) + " has dimensions (" +
                                  std::to_string(f.n()) + ", " + std::to_string(f.m()) +
                                  "), expected (" + std::to_string(n_) + ", " +
                                  std::to_string(m_) + ")");
    }
  };
  check(objective_, "objective");
  for (const auto& f : equalities_) check(f, "equality");
  for (const auto& f : inequalities_) check(f, "inequality");
  if (bounds_) {
    if (m_ != 1) throw std::invalid_argument("bounds require m = 1");
    if (bounds_->lower.size() != n_ || bounds_->upper.size() != n_) {
      throw std::invalid_argument("bounds must have n entries");
    }
    for (int i = 0; i < n_; ++i) {
      if (!(bounds_->lower(i) <= bounds_->upper(i))) {
        throw std::invalid_argument("lower bound exceeds upper bound at index " +
                                    std::to_string(i));
      }
    }
  }
}

const QuadForm& QcqpInstance::form(int k) const {
  if (k == 0) return objective_;
  if (is_equality(k)) return equalities_[k - 1];
  if (is_inequality(k)) return inequalities_[k - 1 - num_equalities()];
  throw std::out_of_range("constraint index " + std::to_string(k) + " out of range");
}

namespace {

void check_dims(const QuadForm& f, const Matrix& Y) {
  if (Y.rows() != f.n() || Y.cols() != f.m()) {
    throw std::invalid_argument("point has dimensions (" + std::to_string(Y.rows()) + ", " +
                                std::to_string(Y.cols()) + "), form expects (" +
                                std::to_string(f.n()) + ", " + std::to_string(f.m()) + ")");
  }
}

double linear_term(const SparseMatrix& B, const Matrix& Y) {
  double s = 0.0;
  for (int k = 0; k < B.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(B, k); it; ++it) {
      s += it.value() * Y(it.row(), it.col());
    }
  }
  return s;
}

}  // namespace

double eval_q(const QuadForm& form, const Matrix& Y) {
  check_dims(form, Y);
  const double quad = form.is_linear() ? 0.0 : Y.cwiseProduct(form.A() * Y).sum();
  return quad + 2.0 * linear_term(form.B(), Y) + form.c();
}

Matrix grad_q(const QuadForm& form, const Matrix& Y) {
  check_dims(form, Y);
  Matrix g = form.A() * Y;
  g += Matrix(form.B());
  return 2.0 * g;
}

double eval_lifted_q(const QuadForm& form, const LiftedPoint& p) {
  check_dims(form, p.Y);
  if (p.X.rows() != form.n() || p.X.cols() != form.n()) {
    throw std::invalid_argument("lifted matrix X has wrong dimensions");
  }
  double trAX = 0.0;
  const SparseMatrix& A = form.A();
  for (int k = 0; k < A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
      trAX += it.value() * p.X(it.row(), it.col());
    }
  }
  return trAX + 2.0 * linear_term(form.B(), p.Y) + form.c();
}

FeasibilityResidual feasibility_residual(const QcqpInstance& inst, const Matrix& Y,
                                         double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  FeasibilityResidual r;
  for (const auto& f : inst.equalities()) {
    r.max_eq_violation = std::max(r.max_eq_violation, std::abs(eval_q(f, Y)));
  }
  for (const auto& f : inst.inequalities()) {
    r.max_ineq_violation = std::max(r.max_ineq_violation, std::max(eval_q(f, Y), 0.0));
  }
  r.is_feasible = r.max_eq_violation <= tol && r.max_ineq_violation <= tol;
  return r;
}

double rank_gap(const LiftedPoint& p) {
  if (p.X.rows() != p.Y.rows() || p.X.cols() != p.Y.rows()) {
    throw std::invalid_argument("lifted point dimensions disagree");
  }
  return p.X.trace() - p.Y.squaredNorm();
}

}  // namespace parabolic
