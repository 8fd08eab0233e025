#include "parabolic/sequential.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "parabolic/errors.h"
#include "parabolic/theory.h"

namespace parabolic {
namespace {

using Clock = std::chrono::steady_clock;

constexpr double kActiveTol = 1e-6;

// Replaces (Y, τ) by a Newton-polished KKT point of the penalized problem when
// it stays close, keeps the inactive constraints satisfied and the inequality
// multipliers nonnegative.
void polish(const QcqpInstance& inst, const Matrix& anchor, double eta,
            const SequentialOptions& opt, RoundRecord& rec) {
  auto p = polish_kkt(inst, rec.Y, rec.tau, rec.binding, anchor, eta);
  if (!p || (p->Y - rec.Y).norm() > 1e-4 * (1.0 + rec.Y.norm())) return;
  for (int k = inst.num_equalities() + 1; k <= inst.num_constraints(); ++k) {
    const bool active = std::binary_search(rec.binding.begin(), rec.binding.end(), k);
    if (active && p->tau.at(k) < -1e-9) return;
    if (!active && eval_q(inst.form(k), p->Y) > 0.0) return;
  }
  rec.Y = p->Y;
  rec.tau = std::move(p->tau);
  rec.objective = eval_q(inst.objective(), rec.Y);
  rec.feasible = feasibility_residual(inst, rec.Y, opt.feas_tol).is_feasible;
}

RoundRecord solve_round(const QcqpInstance& inst, const std::vector<ParabolicPair>& pairs,
                        const Matrix& anchor, double eta, const SequentialOptions& opt) {
  const auto t0 = Clock::now();
  RoundRecord rec;
  rec.anchor = anchor;
  rec.eta = eta;
  RelaxationModel model = build_parabolic_model(inst, pairs, anchor, eta);
  if (opt.box_cuts && inst.bounds()) add_box_cuts(model, inst.bounds()->lower, inst.bounds()->upper);
  RelaxationResult r = solve_relaxation(model, opt.solver, opt.settings);
  rec.status = r.solution.status;
  if (rec.status == SolveStatus::kOptimal) {
    rec.Y = r.point.Y;
    rec.relax_value = r.value;
    rec.objective = eval_q(inst.objective(), rec.Y);
    rec.rank_gap = rank_gap(r.point);
    rec.tight = rec.rank_gap < kTightRankGap;
    rec.feasible = feasibility_residual(inst, rec.Y, opt.feas_tol).is_feasible;
    if (opt.certificates) {
      Multipliers mult = extract_duals(r.solution, model, r.program);
      auto cert = exactness_certificate(mult.Lambda);
      rec.certificate = cert.holds;
      rec.certificate_margin = cert.diag_dominance_margin;
      // Active set from the primal point; the IPM's small multipliers on
      // nearly active rows are not reliable enough to decide activity.
      rec.binding = quasi_binding_set(inst, rec.Y, 0.0, kActiveTol).indices;
      rec.tau = refine_multipliers(inst, rec.Y, rec.binding, mult.tau, anchor, eta);
      if (opt.polish && rec.tight) polish(inst, anchor, eta, opt, rec);
    }
  }
  rec.time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  return rec;
}

struct Runner {
  const QcqpInstance& inst;
  const StopRule& stop;
  const SequentialOptions& opt;
  std::vector<ParabolicPair> pairs;
  bool stop_at_first_tight = false;

  Runner(const QcqpInstance& i, const StopRule& s, const SequentialOptions& o)
      : inst(i), stop(s), opt(o) {
    if (!(stop.rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be positive");
    if (stop.max_rounds < 1) throw std::invalid_argument("max_rounds must be at least 1");
    if (!(stop.step_tol >= 0.0)) throw std::invalid_argument("step_tol must be nonnegative");
    pairs = opt.pairs ? *opt.pairs : select_pairs(inst, default_pair_policy(inst));
  }

  // next_anchor(trace) returns the anchor and λ for the upcoming round.
  RunTrace run(const Matrix& Y0, double eta,
               const std::function<std::pair<Matrix, double>(const RunTrace&)>& next_anchor) {
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
    if (Y0.rows() != inst.n() || Y0.cols() != inst.m()) {
      throw std::invalid_argument("initial point has wrong dimensions");
    }
    RunTrace trace;
    trace.initial_objective = eval_q(inst.objective(), Y0);
    trace.initial_feasible = feasibility_residual(inst, Y0, opt.feas_tol).is_feasible;
    double prev_obj = trace.initial_objective;
    bool prev_ok = trace.initial_feasible;
    Matrix prev_Y = Y0;
    for (int l = 1; l <= stop.max_rounds; ++l) {
      auto [anchor, lambda] = next_anchor(trace);
      RoundRecord rec = solve_round(inst, pairs, anchor, eta, opt);
      rec.round = l;
      rec.lambda = lambda;
      const bool ok = rec.status == SolveStatus::kOptimal;
      trace.rounds.push_back(std::move(rec));
      const RoundRecord& cur = trace.rounds.back();
      if (!ok) {
        trace.aborted = true;
        trace.stop_reason = "subproblem " + to_string(cur.status);
        return trace;
      }
      if (cur.tight && !trace.i_feas) trace.i_feas = l;
      if (stop_at_first_tight && cur.tight) {
        trace.i_stop = l;
        trace.stop_reason = "tight";
        return trace;
      }
      const bool cur_ok = cur.tight && cur.feasible;
      if (cur_ok && prev_ok) {
        const double step = (cur.Y - prev_Y).norm();
        bool met;
        if (stop.step_tol > 0.0) {
          met = step <= stop.step_tol;
        } else if (std::abs(cur.objective) > 1e-12) {
          met = (prev_obj - cur.objective) / std::abs(cur.objective) <= stop.rel_tol;
        } else {
          met = step / std::max(1.0, cur.Y.norm()) <= stop.rel_tol;
        }
        if (met) {
          trace.i_stop = l;
          trace.stop_reason = stop.step_tol > 0.0 ? "step_tol" : "rel_tol";
          return trace;
        }
      }
      prev_ok = cur_ok;
      prev_obj = cur.objective;
      prev_Y = cur.Y;
    }
    trace.i_stop = stop.max_rounds;
    trace.stop_reason = "max_rounds";
    return trace;
  }
};

}  // namespace

std::optional<double> RunTrace::best_feasible_objective() const {
  std::optional<double> best;
  for (const auto& r : rounds) {
    if (r.status == SolveStatus::kOptimal && r.tight && r.feasible) {
      if (!best || r.objective < *best) best = r.objective;
    }
  }
  return best;
}

RunTrace run_sequential(const QcqpInstance& inst, const Matrix& Y0, double eta,
                        const StopRule& stop, const SequentialOptions& options) {
  Runner runner(inst, stop, options);
  return runner.run(Y0, eta, [&](const RunTrace& t) {
    return std::make_pair(t.rounds.empty() ? Y0 : t.rounds.back().Y, 0.0);
  });
}

double backtrack_lambda(const QcqpInstance& inst, const Matrix& Ystar_prev,
                        const Matrix& Ycheck_prev, double eta, const AcceleratedSchedule& schedule,
                        double feas_tol) {
  if (!feasibility_residual(inst, Ystar_prev, feas_tol).is_feasible) return 0.0;
  const BindingSet prev_binding = quasi_binding_set(inst, Ystar_prev, 0.0);
  const double gap = (Ycheck_prev - Ystar_prev).norm();
  TheoryReport rep;
  rep.rho1_ub = pencil_norm_upper(inst, 1);
  rep.rho2_ub = pencil_norm_upper(inst, 2);
  rep.distance_available = true;
  for (double lambda = schedule.lambda_init; lambda >= schedule.lambda_min; lambda *= 0.5) {
    const Matrix Yc = (1.0 - lambda) * Ystar_prev + lambda * Ycheck_prev;
    rep.d_upper = lambda * gap;
    rep.binding = quasi_binding_set(inst, Yc, rep.d_upper);
    bool subset = true;
    for (int k : rep.binding.indices) subset = subset && prev_binding.contains(k);
    if (!subset) continue;
    rep.s_value = singularity(inst, Yc, rep.binding);
    rep.margin = std::isinf(rep.s_value)
                     ? std::numeric_limits<double>::infinity()
                     : rep.s_value - 2.0 * (rep.rho1_ub + rep.rho2_ub) * rep.d_upper;
    if (!(rep.margin > 0.0)) continue;
    const EtaThresholds th = eta_thresholds(inst, Yc, rep);
    if (th.thm2 && eta > *th.thm2 / kEtaInflation) return lambda;
  }
  return 0.0;
}

RunTrace run_accelerated(const QcqpInstance& inst, const Matrix& Ycheck0, double eta,
                         const AcceleratedSchedule& schedule, const StopRule& stop,
                         const SequentialOptions& options) {
  if (schedule.fixed_lambda && !(*schedule.fixed_lambda >= 0.0 && *schedule.fixed_lambda < 1.0)) {
    throw std::invalid_argument("lambda must lie in [0, 1)");
  }
  if (!(schedule.lambda_init > 0.0 && schedule.lambda_init < 1.0) ||
      !(schedule.lambda_min > 0.0)) {
    throw std::invalid_argument("invalid backtracking parameters");
  }
  Runner runner(inst, stop, options);
  return runner.run(Ycheck0, eta, [&](const RunTrace& t) {
    if (t.rounds.empty()) return std::make_pair(Matrix(Ycheck0), 0.0);
    const RoundRecord& prev = t.rounds.back();
    const double lambda =
        schedule.fixed_lambda
            ? *schedule.fixed_lambda
            : backtrack_lambda(inst, prev.Y, prev.anchor, eta, schedule, options.feas_tol);
    return std::make_pair(Matrix((1.0 - lambda) * prev.Y + lambda * prev.anchor), lambda);
  });
}

std::vector<double> eta_grid() {
  std::vector<double> g;
  for (int beta = -6; beta <= 12; ++beta) {
    for (double alpha : {1.0, 2.0, 5.0}) g.push_back(alpha * std::pow(10.0, beta));
  }
  return g;
}

double auto_eta(const QcqpInstance& inst, const Matrix& Y0, int rounds_probe,
                const SequentialOptions& options) {
  if (rounds_probe < 1) throw std::invalid_argument("rounds_probe must be at least 1");
  const std::vector<double> grid = eta_grid();
  StopRule stop;
  stop.max_rounds = rounds_probe;
  SequentialOptions opt = options;
  opt.certificates = false;
  auto succeeds = [&](double eta) {
    Runner runner(inst, stop, opt);
    runner.stop_at_first_tight = true;
    RunTrace t = runner.run(Y0, eta, [&](const RunTrace& tr) {
      return std::make_pair(tr.rounds.empty() ? Y0 : tr.rounds.back().Y, 0.0);
    });
    return t.i_feas.has_value();
  };
  // Gallop upward from 1e0 to bracket the first success, then bisect. Very
  // large values are only tried when the smaller ones fail.
  const int last = static_cast<int>(grid.size()) - 1;
  const int start = static_cast<int>(std::find(grid.begin(), grid.end(), 1.0) - grid.begin());
  int lo = -1;
  int hi = start;
  if (!succeeds(grid[start])) {
    lo = start;
    for (int step = 1;; step *= 2) {
      const int j = std::min(lo + step, last);
      if (succeeds(grid[j])) {
        hi = j;
        break;
      }
      lo = j;
      if (j == last) throw EtaSearchFailed("no penalty value in the search grid gives a tight round");
    }
  }
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (succeeds(grid[mid])) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return grid[hi];
}

Gaps compute_gaps(double q_relax, double q_feasible, double q_ref) {
  if (q_ref == 0.0) throw GapUndefined("reference objective is zero");
  return {100.0 * (q_ref - q_relax) / std::abs(q_ref),
          100.0 * (q_feasible - q_ref) / std::abs(q_ref)};
}

}  // namespace parabolic
