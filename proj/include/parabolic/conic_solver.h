#pragma once

#include <functional>
#include <map>
#include <string>

#include "parabolic/cone_program.h"
#include "parabolic/relaxation.h"

namespace parabolic {

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kMaxIter, kNumericFailure };

std::string to_string(SolveStatus s);

struct SolverSettings {
  double tol_feas = 1e-8;
  double tol_gap = 1e-8;
  int max_iter = 200;
  bool verbose = false;  // per-iteration log on stderr

  // Throws std::invalid_argument on non-positive tolerances or max_iter < 1.
  void validate() const;
};

/// Primal and dual answer of a ConeProgram. Duals follow the Lagrangian
/// cᵀx + yᵀ(Ax − b) + zᵀ(Gx − h) with z in the (self-dual) cone; they satisfy
/// Aᵀy + Gᵀz + c = 0 at optimality.
struct ConeSolution {
  SolveStatus status = SolveStatus::kNumericFailure;
  Vector x;
  Vector s;
  Vector y;
  Vector z;
  double objective = 0.0;       // cᵀx + c0
  double dual_objective = 0.0;  // −bᵀy − hᵀz + c0
  double pres = 0.0;
  double dres = 0.0;
  double gap = 0.0;
  int iterations = 0;
  double time_s = 0.0;
};

using ConeSolver = std::function<ConeSolution(const ConeProgram&, const SolverSettings&)>;

/// Reference solver: homogeneous self-dual interior-point method with
/// Nesterov–Todd scaling and Mehrotra predictor-corrector steps. The KKT system
/// is factored sparse with static regularization and iterative refinement.
ConeSolution solve_cone_program(const ConeProgram& prog, const SolverSettings& settings = {});

ConeSolver reference_solver();

/// Adapter around the Clarabel solver through a Python helper script. Throws
/// SolverFailure if the helper cannot be run.
ConeSolver external_solver();
bool external_solver_available();

// NT scaling of one second-order cone, exposed for testing.
struct SocScaling {
  double eta = 1.0;
  double a = 1.0;
  Vector q;

  Vector apply(const Vector& v) const;          // W v
  Vector apply_inverse(const Vector& v) const;  // W⁻¹ v
  Matrix squared() const;                       // W²
};
SocScaling soc_nt_scaling(const Vector& s, const Vector& z);

/// Encodes, solves and lifts a relaxation model in one call.
struct RelaxationResult {
  ConeProgram program;
  ConeSolution solution;
  LiftedPoint point;      // meaningful only at status optimal
  double value = 0.0;     // model objective at the solution
};
RelaxationResult solve_relaxation(const RelaxationModel& model,
                                  const ConeSolver& solver = reference_solver(),
                                  const SolverSettings& settings = {});

struct Multipliers {
  // Multiplier of lifted constraint k; the Lagrangian is q̄₀ + penalty + Σ τ_k q̄_k.
  std::map<int, double> tau;
  // ηI + A₀ + Σ_{k ∈ B} τ_k A_k, with B = E ∪ {k ∈ I : |τ_k| > dual_tol}.
  Matrix Lambda;
  std::vector<int> binding;
};

/// Throws std::runtime_error when the solution is not optimal.
Multipliers extract_duals(const ConeSolution& sol, const RelaxationModel& model,
                          const ConeProgram& prog, double dual_tol = 1e-7);

}  // namespace parabolic
