#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parabolic/conic_solver.h"
#include "parabolic/qcqp.h"
#include "parabolic/relaxation.h"

namespace parabolic {

constexpr double kTightRankGap = 1e-7;

struct StopRule {
  double rel_tol = 1e-4;
  int max_rounds = 400;
  // When positive the objective test is replaced by ‖Y^(l) − Y^(l−1)‖_F ≤ step_tol.
  double step_tol = 0.0;
};

struct SequentialOptions {
  // Unset means select_pairs(inst, default_pair_policy(inst)).
  std::optional<std::vector<ParabolicPair>> pairs;
  bool box_cuts = false;
  ConeSolver solver = reference_solver();
  SolverSettings settings = tight_solver_settings();
  double feas_tol = 1e-6;
  bool certificates = true;
  // Newton-polish rank-tight round solutions on their active set (needs certificates).
  bool polish = true;

  static SolverSettings tight_solver_settings() {
    SolverSettings s;
    s.tol_feas = s.tol_gap = 1e-10;
    return s;
  }
};

struct RoundRecord {
  int round = 0;
  Matrix anchor;
  Matrix Y;
  double eta = 0.0;
  double lambda = 0.0;  // 0 for plain sequential rounds
  double objective = 0.0;
  double relax_value = 0.0;
  double rank_gap = 0.0;
  bool tight = false;
  bool feasible = false;
  SolveStatus status = SolveStatus::kOptimal;
  double time_s = 0.0;
  std::optional<bool> certificate;
  double certificate_margin = 0.0;
  std::map<int, double> tau;
  std::vector<int> binding;
};

struct RunTrace {
  std::vector<RoundRecord> rounds;
  double initial_objective = 0.0;  // q₀(Y^(0)), the epigraph level
  bool initial_feasible = false;
  std::optional<int> i_feas;  // first rank-tight round, 1-based
  std::optional<int> i_stop;  // round at which the stopping rule fired
  bool aborted = false;       // a subproblem returned a non-optimal status
  std::string stop_reason;

  const RoundRecord* last() const { return rounds.empty() ? nullptr : &rounds.back(); }
  // Best objective over rank-tight feasible rounds.
  std::optional<double> best_feasible_objective() const;
};

/// Repeatedly solves the penalized relaxation anchored at the previous iterate.
RunTrace run_sequential(const QcqpInstance& inst, const Matrix& Y0, double eta,
                        const StopRule& stop = {}, const SequentialOptions& options = {});

struct AcceleratedSchedule {
  // Fixed λ for every round ≥ 2; unset selects λ by backtracking.
  std::optional<double> fixed_lambda;
  double lambda_init = 0.5;
  double lambda_min = 1e-6;
};

/// Anchors each round at (1 − λ)Y*^(l−1) + λY̌^(l−1). Under backtracking λ
/// halves from lambda_init until the quasi-binding set of the blend stays
/// inside that of Y*^(l−1), the margin s − 2(ρ₁+ρ₂)d is positive and η
/// satisfies both near-feasible-start inequalities with d = λ‖Y̌ − Y*‖_F;
/// below lambda_min it falls back to λ = 0. The first round anchors at Y̌0.
RunTrace run_accelerated(const QcqpInstance& inst, const Matrix& Ycheck0, double eta,
                         const AcceleratedSchedule& schedule = {}, const StopRule& stop = {},
                         const SequentialOptions& options = {});

/// λ chosen by the backtracking rule, exposed for inspection.
double backtrack_lambda(const QcqpInstance& inst, const Matrix& Ystar_prev,
                        const Matrix& Ycheck_prev, double eta, const AcceleratedSchedule& schedule,
                        double feas_tol = 1e-6);

std::vector<double> eta_grid();

/// Smallest grid value {1, 2, 5}·10^β, β ∈ [−6, 12], whose run reaches a
/// rank-tight round within rounds_probe rounds, by bisection on the sorted grid.
/// Throws EtaSearchFailed when even the largest value fails.
double auto_eta(const QcqpInstance& inst, const Matrix& Y0, int rounds_probe = 10,
                const SequentialOptions& options = {});

struct Gaps {
  double lb_gap_pct = 0.0;
  double ub_gap_pct = 0.0;
};

/// Throws GapUndefined when q_ref = 0.
Gaps compute_gaps(double q_relax, double q_feasible, double q_ref);

}  // namespace parabolic
