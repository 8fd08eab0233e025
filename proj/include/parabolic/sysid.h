#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "parabolic/qcqp.h"
#include "parabolic/relaxation.h"

namespace parabolic::sysid {

struct LinearSystem {
  Matrix A_true;  // n×n
  Matrix B_true;  // n×m
  Matrix P;       // Riccati solution
  Matrix F;       // m×n, u = F x

  int n() const { return static_cast<int>(A_true.rows()); }
  int m() const { return static_cast<int>(B_true.cols()); }
};

struct RiccatiSolution {
  Matrix P;
  int iterations = 0;
  bool converged = false;
};

/// Fixed-point iteration P ← AᵀPA + I − AᵀPB(I + BᵀPB)⁻¹BᵀPA from P = I.
RiccatiSolution solve_dare(const Matrix& A, const Matrix& B, double tol = 1e-12,
                           int max_iter = 10000);

// ‖AᵀPA + I − P − AᵀPB(I + BᵀPB)⁻¹BᵀPA‖_F
double riccati_residual(const Matrix& A, const Matrix& B, const Matrix& P);
// −(I + BᵀPB)⁻¹BᵀPA
Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& P);
double spectral_radius(const Matrix& M);

/// Builds the system around given matrices. Throws std::runtime_error when the
/// Riccati iteration fails or the gain does not stabilize.
LinearSystem make_system(const Matrix& A, const Matrix& B);

/// A = I + U(−0.25, 0.25), B ~ N(0, 1). A draw whose Riccati iteration fails is
/// replaced by the draw for seed + 1, up to 10 attempts.
LinearSystem generate_system(int n, int m, uint64_t seed);

/// Entries uniform on [0.5, 1.5].
Vector random_initial_state(int n, uint64_t seed);

/// Time steps are 0-based: x[0] is the first state and the known set is
/// {0, stride, 2·stride, …} below the horizon.
struct Trajectory {
  std::vector<Vector> x;
  std::vector<Vector> u;
  std::vector<bool> known;
  double sigma = 0.0;
  int stride = 1;

  int horizon() const { return static_cast<int>(x.size()); }
  int n() const { return x.empty() ? 0 : static_cast<int>(x.front().size()); }
  int m() const { return u.empty() ? 0 : static_cast<int>(u.front().size()); }
  std::vector<int> known_steps() const;
  std::vector<int> unknown_steps() const;
};

/// u[t] = F x[t] + w[t] with w ~ N(0, σ²), x[t+1] = A x[t] + B u[t].
Trajectory simulate(const LinearSystem& sys, const Vector& x1, int horizon, double sigma = 0.1,
                    int known_stride = 4, uint64_t seed = 0);

/// Hidden states are stored divided by this factor. The QCQP is unchanged up
/// to the substitution, but the proximal term of the penalized relaxation then
/// weighs state moves less than moves in A.
constexpr double kDefaultStateScale = 3.0;

/// Row layout of the matrix variable Y (n columns): rows [0, n) hold A, then
/// one row x[t]ᵀ/state_scale per unknown step in increasing t, then the m rows of Bᵀ.
class SysidLayout {
 public:
  explicit SysidLayout(const Trajectory& traj, double state_scale = kDefaultStateScale);

  int n() const { return n_; }
  int m() const { return m_; }
  int rows() const { return n_ + static_cast<int>(unknown_.size()) + m_; }
  int a_row(int k) const { return k; }
  // -1 for known steps.
  int state_row(int t) const { return state_row_[t]; }
  int b_row(int j) const { return n_ + static_cast<int>(unknown_.size()) + j; }
  const std::vector<int>& unknown_steps() const { return unknown_; }
  int num_variables() const { return rows() * n_; }
  double state_scale() const { return scale_; }

  Matrix pack(const Matrix& A, const Matrix& B, const std::vector<Vector>& x) const;
  Matrix unpack_A(const Matrix& Y) const;
  Matrix unpack_B(const Matrix& Y) const;
  // Known steps are copied from traj.
  std::vector<Vector> unpack_states(const Matrix& Y, const Trajectory& traj) const;

 private:
  int n_;
  int m_;
  double scale_;
  std::vector<int> unknown_;
  std::vector<int> state_row_;
};

/// Feasibility QCQP with one equality per (t, k), t < horizon − 1:
/// e_kᵀ(A x[t] + B u[t] − x[t+1]) = 0. Zero objective.
QcqpInstance build_sysid_instance(const Trajectory& traj,
                                  double state_scale = kDefaultStateScale);

/// Diagonal pairs on the A and unknown-state rows plus both signed pairs for
/// each (A row k, unknown step t). The Bᵀ rows enter linearly and get none.
std::vector<ParabolicPair> sysid_pairs(const Trajectory& traj);

RelaxationModel build_sysid_relaxation(const Trajectory& traj,
                                       const std::optional<Matrix>& anchor = std::nullopt,
                                       double eta = 0.0,
                                       double state_scale = kDefaultStateScale);

/// Ǎ = I, B̌ = 0 and x̌[t] = 0 on unknown steps.
Matrix initial_point(const Trajectory& traj);

/// (1/n)‖A − A_true‖_F + (1/√(nm))‖B − B_true‖_F
double recovery_error(const Matrix& A, const Matrix& B, const LinearSystem& sys);

}  // namespace parabolic::sysid
