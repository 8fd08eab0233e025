#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parabolic/conic_solver.h"
#include "parabolic/qcqp.h"

namespace parabolic {

/// Settings of the projection local search behind feasibility_distance_upper.
struct LocalSearchSettings {
  int max_iter = 200;
  double feas_tol = 1e-9;  // target violation; results are accepted at 1e-7
  double step_tol = 1e-12;
};

struct DistanceEstimate {
  double d_upper = 0.0;
  Matrix Y_proj;
};

/// Upper bound on the distance from Yc to the feasible set, from a local
/// projection (damped Gauss–Newton to reach the feasible set, then SQP steps
/// on ‖Y − Yc‖²). A second start is taken from the penalized relaxation
/// solution at weight eta_probe; the closer of the two feasible points wins.
/// Returns nullopt when no start reaches feasibility.
std::optional<DistanceEstimate> feasibility_distance_upper(
    const QcqpInstance& inst, const Matrix& Yc, double eta_probe,
    const LocalSearchSettings& settings = {});

// Damped Gauss–Newton on the violated constraints; nullopt if it stalls.
std::optional<Matrix> restore_feasibility(const QcqpInstance& inst, const Matrix& Y,
                                          const LocalSearchSettings& settings = {});

// q_k(Yc) + ‖∇q_k(Yc)‖_F d + ‖A_k‖₂ d².
double expanded_q(const QcqpInstance& inst, int k, const Matrix& Yc, double d);

struct BindingSet {
  std::vector<int> indices;  // ascending; always contains every equality
  bool contains(int k) const;
  int size() const { return static_cast<int>(indices.size()); }
};

BindingSet quasi_binding_set(const QcqpInstance& inst, const Matrix& Yc, double d,
                             double binding_tol = 1e-8);

/// Rows vec{∇q_k(Yc)}ᵀ in the order of q, columns in column-major vec order.
Matrix jacobian(const QcqpInstance& inst, const std::vector<int>& q, const Matrix& Yc);

// σ_min of the quasi-binding Jacobian when |B| ≤ n, otherwise 0.
double singularity(const QcqpInstance& inst, const Matrix& Yc, double d);
double singularity(const QcqpInstance& inst, const Matrix& Yc, const BindingSet& b);

// Σ_{k ∈ E ∪ I} ‖A_k‖_which, which ∈ {1, 2}.
double pencil_norm_upper(const QcqpInstance& inst, int which);

struct TheoryReport {
  double rho1_ub = 0.0;
  double rho2_ub = 0.0;
  bool distance_available = false;
  double d_upper = 0.0;
  Matrix Y_proj;
  bool feasible = false;  // Yc itself is feasible
  BindingSet binding;
  double s_value = 0.0;
  bool glicq_ok = false;
  double margin = 0.0;  // s − 2(ρ₁ + ρ₂) d
  std::optional<double> eta_thm1;
  std::optional<double> eta_thm2;
  // n < |B| ≤ n·m: rows may still be independent but s is 0 by definition.
  bool wide_binding = false;
  std::vector<std::string> notes;
};

struct EtaThresholds {
  std::optional<double> thm1;
  std::optional<double> thm2;
};

constexpr double kEtaInflation = 1.05;

/// Threshold formulas of the feasible-start and near-feasible-start results,
/// each maximized over the inactive inequalities and inflated by 5%.
EtaThresholds eta_thresholds(const QcqpInstance& inst, const Matrix& Yc,
                             const TheoryReport& report);

/// Builds the full report; thresholds are filled in as well.
TheoryReport analyze(const QcqpInstance& inst, const Matrix& Yc, double eta_probe = 1.0,
                     const LocalSearchSettings& settings = {});

struct ExactnessCertificate {
  Matrix Lambda;
  double diag_dominance_margin = 0.0;  // min_i Λ_ii − Σ_{j≠i} |Λ_ij|
  bool holds = false;
};

ExactnessCertificate exactness_certificate(const QcqpInstance& inst,
                                           const std::map<int, double>& tau, double eta,
                                           const std::vector<int>& binding);
ExactnessCertificate exactness_certificate(const Matrix& Lambda);

/// Max of the stationarity, primal, dual-sign and inactive-feasibility
/// residuals of the first-order conditions at (Y, τ) with binding set B.
double kkt_residual(const QcqpInstance& inst, const Matrix& Y, const std::map<int, double>& tau,
                    const std::vector<int>& binding);

/// Least-squares correction of extracted multipliers on the binding set so that
/// the penalized stationarity ∇q₀/2 + η(Y − Y̌) + Σ τ_k ∇q_k/2 = 0 holds as
/// closely as possible. The minimum-norm correction keeps τ near its input.
std::map<int, double> refine_multipliers(const QcqpInstance& inst, const Matrix& Y,
                                         const std::vector<int>& binding,
                                         const std::map<int, double>& tau, const Matrix& anchor,
                                         double eta);

struct PolishedPoint {
  Matrix Y;
  std::map<int, double> tau;
  double residual = 0.0;
};

/// Newton iterations on the first-order system of
///   minimize q₀(Y) + η‖Y − Y̌‖²  s.t.  q_k(Y) = 0, k ∈ binding,
/// started from (Y, τ). Used to sharpen interior-point solutions, whose
/// accuracy is limited at degenerate optima. nullopt when the system is
/// singular, |binding| > n·m, or the iteration does not converge.
std::optional<PolishedPoint> polish_kkt(const QcqpInstance& inst, const Matrix& Y,
                                        const std::map<int, double>& tau,
                                        const std::vector<int>& binding, const Matrix& anchor,
                                        double eta);

/// Sampled estimate of the convergence threshold ‖A₀‖₁ + ‖A₀‖₂ + 3ρ₁ max‖∇q₀‖ / min s
/// over a set of feasible points. Diagnostic only: the true constant needs the
/// max and min over a whole sublevel set. nullopt if some sampled s is 0.
std::optional<double> convergence_threshold_estimate(const QcqpInstance& inst,
                                                     const std::vector<Matrix>& points);

}  // namespace parabolic
