#include "parabolic/sysid.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace parabolic::sysid {

namespace {

using Triplet = Eigen::Triplet<double>;

Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& P) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const Matrix BtP = B.transpose() * P;
  const Matrix S = Matrix::Identity(m, m) + BtP * B;
  const Matrix K = S.ldlt().solve(BtP * A);
  Matrix next = A.transpose() * P * A + Matrix::Identity(n, n) - A.transpose() * BtP.transpose() * K;
  return 0.5 * (next + next.transpose());
}

SparseMatrix sparse(int rows, int cols, const std::vector<Triplet>& entries) {
  SparseMatrix S(rows, cols);
  S.setFromTriplets(entries.begin(), entries.end());
  return S;
}

}  // namespace

RiccatiSolution solve_dare(const Matrix& A, const Matrix& B, double tol, int max_iter) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw std::invalid_argument("solve_dare: dimension mismatch");
  }
  RiccatiSolution out;
  out.P = Matrix::Identity(A.rows(), A.rows());
  for (int it = 1; it <= max_iter; ++it) {
    Matrix next = riccati_map(A, B, out.P);
    if (!next.allFinite()) break;
    const double step = (next - out.P).norm();
    out.P = std::move(next);
    out.iterations = it;
    if (step < tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

double riccati_residual(const Matrix& A, const Matrix& B, const Matrix& P) {
  return (riccati_map(A, B, P) - P).norm();
}

Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& P) {
  const int m = static_cast<int>(B.cols());
  const Matrix BtP = B.transpose() * P;
  const Matrix S = Matrix::Identity(m, m) + BtP * B;
  return -S.ldlt().solve(BtP * A);
}

double spectral_radius(const Matrix& M) {
  Eigen::EigenSolver<Matrix> eig(M, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

LinearSystem make_system(const Matrix& A, const Matrix& B) {
  RiccatiSolution ric = solve_dare(A, B);
  if (!ric.converged) throw std::runtime_error("Riccati iteration did not converge");
  LinearSystem sys{A, B, ric.P, lqr_gain(A, B, ric.P)};
  if (riccati_residual(A, B, sys.P) >= 1e-9) {
    throw std::runtime_error("Riccati residual too large");
  }
  if (spectral_radius(A + B * sys.F) >= 1.0) {
    throw std::runtime_error("LQR gain does not stabilize");
  }
  return sys;
}

LinearSystem generate_system(int n, int m, uint64_t seed) {
  if (n < 1 || m < 1) throw std::invalid_argument("generate_system: n, m must be positive");
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::mt19937_64 rng(seed + attempt);
    std::uniform_real_distribution<double> unif(-0.25, 0.25);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix A = Matrix::Identity(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) A(i, j) += unif(rng);
    Matrix B(n, m);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < n; ++i) B(i, j) = normal(rng);
    try {
      return make_system(A, B);
    } catch (const std::runtime_error&) {
    }
  }
  throw std::runtime_error("generate_system: no stabilizable draw in 10 attempts");
}

Vector random_initial_state(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Vector x(n);
  for (int i = 0; i < n; ++i) x(i) = unif(rng);
  return x;
}

std::vector<int> Trajectory::known_steps() const {
  std::vector<int> out;
  for (int t = 0; t < horizon(); ++t)
    if (known[t]) out.push_back(t);
  return out;
}

std::vector<int> Trajectory::unknown_steps() const {
  std::vector<int> out;
  for (int t = 0; t < horizon(); ++t)
    if (!known[t]) out.push_back(t);
  return out;
}

Trajectory simulate(const LinearSystem& sys, const Vector& x1, int horizon, double sigma,
                    int known_stride, uint64_t seed) {
  if (horizon < 2) throw std::invalid_argument("simulate: horizon must be at least 2");
  if (known_stride < 1) throw std::invalid_argument("simulate: stride must be positive");
  if (x1.size() != sys.n()) throw std::invalid_argument("simulate: x1 has wrong size");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Trajectory traj;
  traj.sigma = sigma;
  traj.stride = known_stride;
  traj.x.reserve(horizon);
  traj.u.reserve(horizon);
  Vector x = x1;
  for (int t = 0; t < horizon; ++t) {
    Vector w(sys.m());
    for (int j = 0; j < sys.m(); ++j) w(j) = sigma * normal(rng);
    Vector u = sys.F * x + w;
    traj.x.push_back(x);
    traj.u.push_back(u);
    traj.known.push_back(t % known_stride == 0);
    x = sys.A_true * x + sys.B_true * u;
  }
  return traj;
}

SysidLayout::SysidLayout(const Trajectory& traj, double state_scale)
    : n_(traj.n()), m_(traj.m()), scale_(state_scale), state_row_(traj.horizon(), -1) {
  if (!(state_scale > 0.0)) throw std::invalid_argument("state_scale must be positive");
  for (int t = 0; t < traj.horizon(); ++t) {
    if (traj.known[t]) continue;
    state_row_[t] = n_ + static_cast<int>(unknown_.size());
    unknown_.push_back(t);
  }
}

Matrix SysidLayout::pack(const Matrix& A, const Matrix& B, const std::vector<Vector>& x) const {
  Matrix Y = Matrix::Zero(rows(), n_);
  Y.topRows(n_) = A;
  for (int t : unknown_) Y.row(state_row_[t]) = x[t].transpose() / scale_;
  Y.bottomRows(m_) = B.transpose();
  return Y;
}

Matrix SysidLayout::unpack_A(const Matrix& Y) const { return Y.topRows(n_); }

Matrix SysidLayout::unpack_B(const Matrix& Y) const { return Y.bottomRows(m_).transpose(); }

std::vector<Vector> SysidLayout::unpack_states(const Matrix& Y, const Trajectory& traj) const {
  std::vector<Vector> x = traj.x;
  for (int t : unknown_) x[t] = scale_ * Y.row(state_row_[t]).transpose();
  return x;
}

QcqpInstance build_sysid_instance(const Trajectory& traj, double state_scale) {
  const SysidLayout layout(traj, state_scale);
  const double c_x = state_scale;
  const int n = layout.n();
  const int T = layout.rows();
  std::vector<QuadForm> eqs;
  eqs.reserve(static_cast<size_t>(n) * (traj.horizon() - 1));
  for (int t = 0; t + 1 < traj.horizon(); ++t) {
    const int rt = layout.state_row(t);
    const int rnext = layout.state_row(t + 1);
    for (int k = 0; k < n; ++k) {
      std::vector<Triplet> a, b;
      double c = 0.0;
      if (rt >= 0) {
        // e_kᵀ A x[t] = c_x⟨Y_k, Y_rt⟩
        a.emplace_back(k, rt, 0.5 * c_x);
        a.emplace_back(rt, k, 0.5 * c_x);
      } else {
        for (int i = 0; i < n; ++i) b.emplace_back(k, i, 0.5 * traj.x[t](i));
      }
      for (int j = 0; j < layout.m(); ++j) b.emplace_back(layout.b_row(j), k, 0.5 * traj.u[t](j));
      if (rnext >= 0) {
        b.emplace_back(rnext, k, -0.5 * c_x);
      } else {
        c = -traj.x[t + 1](k);
      }
      eqs.emplace_back(sparse(T, T, a), sparse(T, n, b), c);
    }
  }
  return QcqpInstance(T, n, QuadForm::Zero(T, n), std::move(eqs), {});
}

std::vector<ParabolicPair> sysid_pairs(const Trajectory& traj) {
  const SysidLayout layout(traj);
  std::vector<ParabolicPair> pairs;
  for (int k = 0; k < layout.n(); ++k) pairs.push_back({k, k, PairSign::kPlus});
  for (int t : layout.unknown_steps()) {
    const int r = layout.state_row(t);
    pairs.push_back({r, r, PairSign::kPlus});
  }
  for (int t : layout.unknown_steps()) {
    const int r = layout.state_row(t);
    for (int k = 0; k < layout.n(); ++k) {
      pairs.push_back({k, r, PairSign::kPlus});
      pairs.push_back({k, r, PairSign::kMinus});
    }
  }
  return pairs;
}

RelaxationModel build_sysid_relaxation(const Trajectory& traj, const std::optional<Matrix>& anchor,
                                       double eta, double state_scale) {
  auto inst = std::make_shared<const QcqpInstance>(build_sysid_instance(traj, state_scale));
  return build_parabolic_model(inst, sysid_pairs(traj), anchor, eta);
}

Matrix initial_point(const Trajectory& traj) {
  const SysidLayout layout(traj);
  Matrix Y = Matrix::Zero(layout.rows(), layout.n());
  Y.topRows(layout.n()).setIdentity();
  return Y;
}

double recovery_error(const Matrix& A, const Matrix& B, const LinearSystem& sys) {
  if (A.rows() != sys.n() || A.cols() != sys.n() || B.rows() != sys.n() || B.cols() != sys.m()) {
    throw std::invalid_argument("recovery_error: dimension mismatch");
  }
  return (A - sys.A_true).norm() / sys.n() +
         (B - sys.B_true).norm() / std::sqrt(static_cast<double>(sys.n() * sys.m()));
}

}  // namespace parabolic::sysid
