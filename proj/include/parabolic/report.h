#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "parabolic/sequential.h"
#include "parabolic/theory.h"

namespace parabolic::report {

using Json = nlohmann::json;

/// Header "round,objective,rank_gap,time_s" and one row per round.
std::string trace_csv(const RunTrace& trace);

/// Keys eta, i_feas, i_stop, t_stop, UB, GAP. i_stop falls back to the last
/// round when the stopping rule never fired; t_stop is the wall time summed
/// over rounds 1..i_stop. UB is q₀ at i_stop when that round is feasible and
/// the best feasible objective otherwise. GAP (%) needs a nonzero q_ref.
/// Absent values are null.
Json run_summary(const RunTrace& trace, double eta, std::optional<double> q_ref = {});

/// Keys LB, GAP, t. GAP (%) needs a nonzero q_ref.
Json bound_summary(double lower_bound, double time_s, std::optional<double> q_ref = {});

Json theory_json(const TheoryReport& report);

}  // namespace parabolic::report
