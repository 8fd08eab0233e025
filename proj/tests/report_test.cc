#include "parabolic/report.h"

#include <sstream>

#include <gtest/gtest.h>

#include "parabolic/errors.h"

namespace parabolic::report {
namespace {

RoundRecord round(int l, double objective, double gap, double t, bool feasible) {
  RoundRecord r;
  r.round = l;
  r.objective = objective;
  r.rank_gap = gap;
  r.time_s = t;
  r.feasible = feasible;
  r.tight = gap < kTightRankGap;
  return r;
}

TEST(Csv, EmptyTraceIsHeaderOnly) {
  EXPECT_EQ(trace_csv(RunTrace{}), "round,objective,rank_gap,time_s\n");
}

TEST(Csv, RowsRoundTrip) {
  RunTrace trace;
  trace.rounds.push_back(round(1, -1.0 / 3.0, 2.5e-9, 0.125, true));
  trace.rounds.push_back(round(2, -0.4, 1e-12, 0.25, true));
  std::istringstream in(trace_csv(trace));
  std::string line;
  std::getline(in, line);
  for (const auto& r : trace.rounds) {
    ASSERT_TRUE(std::getline(in, line));
    int l;
    double q, g, t;
    ASSERT_EQ(std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &l, &q, &g, &t), 4);
    EXPECT_EQ(l, r.round);
    EXPECT_EQ(q, r.objective);
    EXPECT_EQ(g, r.rank_gap);
    EXPECT_EQ(t, r.time_s);
  }
  EXPECT_FALSE(std::getline(in, line));
}

TEST(Summary, OneRound) {
  RunTrace trace;
  trace.rounds.push_back(round(1, 2.0, 0.0, 0.5, true));
  trace.i_feas = 1;
  const Json j = run_summary(trace, 5.0);
  EXPECT_EQ(j["i_stop"], 1);
  EXPECT_EQ(j["i_feas"], 1);
  EXPECT_EQ(j["UB"], 2.0);
  EXPECT_EQ(j["t_stop"], 0.5);
  EXPECT_TRUE(j["GAP"].is_null());
}

TEST(Summary, ExactKeys) {
  RunTrace trace;
  trace.rounds.push_back(round(1, -10.0, 0.3, 0.5, false));
  trace.rounds.push_back(round(2, -10.93, 0.0, 0.25, true));
  trace.rounds.push_back(round(3, -10.942, 0.0, 0.25, true));
  trace.i_feas = 2;
  trace.i_stop = 3;
  const Json j = run_summary(trace, 5.0, -10.9486);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(keys, (std::vector<std::string>{"GAP", "UB", "eta", "i_feas", "i_stop", "t_stop"}));
  EXPECT_EQ(j["eta"], 5.0);
  EXPECT_EQ(j["i_feas"], 2);
  EXPECT_EQ(j["i_stop"], 3);
  EXPECT_DOUBLE_EQ(j["t_stop"].get<double>(), 1.0);
  EXPECT_EQ(j["UB"], -10.942);
  EXPECT_NEAR(j["GAP"].get<double>(), 100.0 * 0.0066 / 10.9486, 1e-12);
}

TEST(Summary, InfeasibleStopFallsBackToBestFeasible) {
  RunTrace trace;
  trace.rounds.push_back(round(1, 3.0, 0.0, 0.1, true));
  trace.rounds.push_back(round(2, 1.0, 0.5, 0.1, false));
  trace.i_feas = 1;
  const Json j = run_summary(trace, 1.0, 2.0);
  EXPECT_EQ(j["i_stop"], 2);
  EXPECT_EQ(j["UB"], 3.0);
  EXPECT_DOUBLE_EQ(j["GAP"].get<double>(), 50.0);
}

TEST(Summary, EmptyTrace) {
  const Json j = run_summary(RunTrace{}, 1.0, 1.0);
  EXPECT_TRUE(j["i_stop"].is_null());
  EXPECT_TRUE(j["UB"].is_null());
  EXPECT_TRUE(j["GAP"].is_null());
}

TEST(Bound, Keys) {
  const Json j = bound_summary(-12.5, 0.3, -10.0);
  EXPECT_EQ(j["LB"], -12.5);
  EXPECT_DOUBLE_EQ(j["GAP"].get<double>(), 25.0);
  EXPECT_EQ(j["t"], 0.3);
  EXPECT_TRUE(bound_summary(1.0, 0.0, 0.0)["GAP"].is_null());
}

TEST(Theory, InfiniteSingularityIsNull) {
  TheoryReport r;
  r.s_value = std::numeric_limits<double>::infinity();
  r.eta_thm1 = 3.0;
  const Json j = theory_json(r);
  EXPECT_TRUE(j["s"].is_null());
  EXPECT_EQ(j["eta_thm1"], 3.0);
  EXPECT_TRUE(j["eta_thm2"].is_null());
}

}  // namespace
}  // namespace parabolic::report
