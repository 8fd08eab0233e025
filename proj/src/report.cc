#include "parabolic/report.h"

#include <cmath>
#include <sstream>

#include "parabolic/errors.h"

namespace parabolic::report {

namespace {

template <class T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

// Non-finite doubles become null; json would otherwise emit them as null silently.
Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

std::string trace_csv(const RunTrace& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "round,objective,rank_gap,time_s\n";
  for (const auto& r : trace.rounds) {
    out << r.round << ',' << r.objective << ',' << r.rank_gap << ',' << r.time_s << '\n';
  }
  return out.str();
}

Json run_summary(const RunTrace& trace, double eta, std::optional<double> q_ref) {
  Json j;
  j["eta"] = eta;
  j["i_feas"] = optional_json(trace.i_feas);
  std::optional<int> i_stop = trace.i_stop;
  if (!i_stop && !trace.rounds.empty()) i_stop = static_cast<int>(trace.rounds.size());
  j["i_stop"] = optional_json(i_stop);
  std::optional<double> t_stop, ub;
  if (i_stop) {
    double t = 0.0;
    for (int l = 0; l < *i_stop; ++l) t += trace.rounds[l].time_s;
    t_stop = t;
    const RoundRecord& r = trace.rounds[*i_stop - 1];
    ub = r.feasible ? std::optional<double>(r.objective) : trace.best_feasible_objective();
  }
  j["t_stop"] = optional_json(t_stop);
  j["UB"] = optional_json(ub);
  j["GAP"] = nullptr;
  if (ub && q_ref && *q_ref != 0.0) {
    j["GAP"] = compute_gaps(*ub, *ub, *q_ref).ub_gap_pct;
  }
  return j;
}

Json bound_summary(double lower_bound, double time_s, std::optional<double> q_ref) {
  Json j;
  j["LB"] = lower_bound;
  j["GAP"] = nullptr;
  if (q_ref && *q_ref != 0.0) j["GAP"] = compute_gaps(lower_bound, lower_bound, *q_ref).lb_gap_pct;
  j["t"] = time_s;
  return j;
}

Json theory_json(const TheoryReport& report) {
  Json j;
  j["rho1_ub"] = report.rho1_ub;
  j["rho2_ub"] = report.rho2_ub;
  j["feasible"] = report.feasible;
  j["distance_available"] = report.distance_available;
  j["d_upper"] = report.distance_available ? Json(report.d_upper) : Json(nullptr);
  j["binding"] = report.binding.indices;
  j["s"] = finite_or_null(report.s_value);
  j["glicq"] = report.glicq_ok;
  j["wide_binding"] = report.wide_binding;
  j["margin"] = finite_or_null(report.margin);
  j["eta_thm1"] = optional_json(report.eta_thm1);
  j["eta_thm2"] = optional_json(report.eta_thm2);
  j["notes"] = report.notes;
  return j;
}

}  // namespace parabolic::report
