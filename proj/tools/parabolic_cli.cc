#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "parabolic/conic_solver.h"
#include "parabolic/errors.h"
#include "parabolic/instance_io.h"
#include "parabolic/relaxation.h"
#include "parabolic/report.h"
#include "parabolic/sequential.h"
#include "parabolic/sysid.h"
#include "parabolic/theory.h"

namespace fs = std::filesystem;
using namespace parabolic;
using Json = nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kInputError = 2, kSolverError = 3, kEtaError = 4 };

struct Common {
  std::string instance;
  std::string pairs = "default";
  bool box_cuts = false;
  std::string solver = "reference";
  std::string start = "zero";
  std::string out;
  uint64_t seed = 1;
};

struct SeqFlags {
  std::optional<double> eta;
  bool auto_eta = false;
  double rel_tol = 1e-4;
  int max_rounds = 400;
  int probe_rounds = 10;
  std::optional<double> lambda;
};

void add_common(CLI::App* sub, Common& c, bool with_instance = true) {
  if (with_instance) sub->add_option("instance", c.instance, "Instance file (.json or .qplib)")->required();
  sub->add_option("--pairs", c.pairs, "Parabolic pair policy")
      ->check(CLI::IsMember({"default", "full", "sparsity"}));
  sub->add_flag("--box-cuts", c.box_cuts, "Add bound cuts from variable bounds");
  sub->add_option("--solver", c.solver, "Conic solver")
      ->check(CLI::IsMember({"reference", "external"}));
  sub->add_option("--out", c.out, "Output path prefix (writes <out>.csv and <out>.json)");
  sub->add_option("--seed", c.seed, "Random seed");
}

void add_sequential(CLI::App* sub, SeqFlags& s, Common& c) {
  sub->add_option("--eta", s.eta, "Penalty weight");
  sub->add_flag("--auto-eta", s.auto_eta, "Select eta from the grid {1,2,5}e[-6,12]");
  sub->add_option("--rel-tol", s.rel_tol, "Relative objective decrease that stops the run");
  sub->add_option("--max-rounds", s.max_rounds, "Round cap");
  sub->add_option("--probe-rounds", s.probe_rounds, "Rounds allowed per auto-eta probe");
  sub->add_option("--start", c.start, "Initial point")
      ->check(CLI::IsMember({"zero", "reference"}));
}

ConeSolver pick_solver(const std::string& name) {
  if (name == "external") {
    if (!external_solver_available()) throw SolverFailure("external solver is not available");
    return external_solver();
  }
  return reference_solver();
}

std::vector<ParabolicPair> pick_pairs(const QcqpInstance& inst, const std::string& policy) {
  if (policy == "full") return select_pairs(inst, PairPolicy::kFull);
  if (policy == "sparsity") return select_pairs(inst, PairPolicy::kSparsity);
  return select_pairs(inst, default_pair_policy(inst));
}

Matrix pick_start(const io::InstanceDocument& doc, const std::string& start) {
  if (start == "reference") {
    if (!doc.reference_solution) throw SchemaError("instance has no reference solution");
    return *doc.reference_solution;
  }
  return Matrix::Zero(doc.instance.n(), doc.instance.m());
}

void emit(const Common& c, const Json& summary, const std::string* csv) {
  if (c.out.empty()) {
    std::cout << summary.dump(2) << "\n";
    return;
  }
  io::write_text_file(c.out + ".json", summary.dump(2) + "\n");
  if (csv) io::write_text_file(c.out + ".csv", *csv);
}

Json relax_json(const io::InstanceDocument& doc, const Common& c) {
  const QcqpInstance& inst = doc.instance;
  const auto t0 = std::chrono::steady_clock::now();
  RelaxationModel model = build_parabolic_model(inst, pick_pairs(inst, c.pairs), std::nullopt, 0.0);
  if (c.box_cuts && inst.bounds()) add_box_cuts(model, inst.bounds()->lower, inst.bounds()->upper);
  const RelaxationResult r = solve_relaxation(model, pick_solver(c.solver));
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.solution.status != SolveStatus::kOptimal) {
    throw SolverFailure("relaxation returned " + to_string(r.solution.status));
  }
  Json j = report::bound_summary(r.value, t, doc.reference_objective);
  j["rank_gap"] = rank_gap(r.point);
  return j;
}

struct SeqResult {
  RunTrace trace;
  double eta;
};

SeqResult run_seq(const io::InstanceDocument& doc, const Common& c, const SeqFlags& s,
                  bool accelerated) {
  const QcqpInstance& inst = doc.instance;
  SequentialOptions options;
  options.pairs = pick_pairs(inst, c.pairs);
  options.box_cuts = c.box_cuts;
  options.solver = pick_solver(c.solver);
  const Matrix Y0 = pick_start(doc, c.start);
  double eta;
  if (s.auto_eta) {
    eta = auto_eta(inst, Y0, s.probe_rounds, options);
  } else if (s.eta) {
    eta = *s.eta;
  } else {
    throw CLI::ValidationError("--eta", "either --eta or --auto-eta is required");
  }
  StopRule stop;
  stop.rel_tol = s.rel_tol;
  stop.max_rounds = s.max_rounds;
  RunTrace trace;
  if (accelerated) {
    AcceleratedSchedule schedule;
    schedule.fixed_lambda = s.lambda;
    trace = run_accelerated(inst, Y0, eta, schedule, stop, options);
  } else {
    trace = run_sequential(inst, Y0, eta, stop, options);
  }
  if (trace.aborted) throw SolverFailure("run aborted: " + trace.stop_reason);
  return {std::move(trace), eta};
}

Json seq_summary(const io::InstanceDocument& doc, const SeqResult& r) {
  Json j = report::run_summary(r.trace, r.eta, doc.reference_objective);
  j["stop_reason"] = r.trace.stop_reason;
  return j;
}

int cmd_sysid(const Common& c, int n, int m, int horizon, int stride, double sigma,
              double eta, int max_rounds, double state_scale) {
  const sysid::LinearSystem sys = sysid::generate_system(n, m, c.seed);
  const sysid::Trajectory traj = sysid::simulate(sys, sysid::random_initial_state(n, c.seed + 1000),
                                                 horizon, sigma, stride, c.seed + 2000);
  const sysid::SysidLayout layout(traj, state_scale);
  SequentialOptions options;
  options.pairs = sysid::sysid_pairs(traj);
  options.solver = pick_solver(c.solver);
  StopRule stop;
  stop.max_rounds = max_rounds;
  stop.step_tol = 1e-9;
  const Matrix Y0 = sysid::initial_point(traj);
  const RunTrace trace =
      run_sequential(sysid::build_sysid_instance(traj, state_scale), Y0, eta, stop, options);
  std::ostringstream csv;
  csv.precision(17);
  csv << "round,error,rank_gap,time_s\n";
  double err = sysid::recovery_error(Matrix::Identity(n, n), Matrix::Zero(n, m), sys);
  csv << 0 << ',' << err << ',' << 0.0 << ',' << 0.0 << '\n';
  for (const auto& r : trace.rounds) {
    if (r.status != SolveStatus::kOptimal) break;
    err = sysid::recovery_error(layout.unpack_A(r.Y), layout.unpack_B(r.Y), sys);
    csv << r.round << ',' << err << ',' << r.rank_gap << ',' << r.time_s << '\n';
  }
  Json j;
  j["n"] = n;
  j["m"] = m;
  j["horizon"] = horizon;
  j["known"] = traj.known_steps().size();
  j["unknown"] = traj.unknown_steps().size();
  j["riccati_residual"] = sysid::riccati_residual(sys.A_true, sys.B_true, sys.P);
  j["rounds"] = trace.rounds.size();
  j["final_error"] = err;
  j["stop_reason"] = trace.stop_reason;
  const std::string csv_text = csv.str();
  if (c.out.empty()) {
    std::cout << csv_text << j.dump(2) << "\n";
  } else {
    io::write_text_file(c.out + ".csv", csv_text);
    io::write_text_file(c.out + ".json", j.dump(2) + "\n");
  }
  if (trace.aborted) throw SolverFailure("run aborted: " + trace.stop_reason);
  return kOk;
}

int cmd_bench(const std::string& dir, const Common& c, const SeqFlags& s, int threads) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".json" || ext == ".qplib")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (!c.out.empty()) fs::create_directories(c.out);
  std::vector<Json> results(files.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < files.size(); i = next++) {
      Json j;
      j["instance"] = files[i].filename().string();
      try {
        const io::InstanceDocument doc = io::read_instance(files[i].string());
        j["relax"] = relax_json(doc, c);
        const SeqResult r = run_seq(doc, c, s, false);
        j["penalized"] = seq_summary(doc, r);
        if (!c.out.empty()) {
          const std::string stem = (fs::path(c.out) / files[i].stem()).string();
          io::write_text_file(stem + ".csv", report::trace_csv(r.trace));
          io::write_text_file(stem + ".json", j.dump(2) + "\n");
        }
      } catch (const std::exception& e) {
        j["error"] = e.what();
      }
      results[i] = std::move(j);
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(files.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  int failed = 0;
  for (const auto& j : results) {
    std::cout << j.dump() << "\n";
    failed += j.contains("error");
  }
  return failed ? kSolverError : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized parabolic relaxation for QCQPs"};
  app.require_subcommand(1);
  Common common;
  SeqFlags seq;

  auto* relax = app.add_subcommand("relax", "Lower bound from the parabolic relaxation");
  add_common(relax, common);

  auto* sequential = app.add_subcommand("sequential", "Sequential penalized relaxation");
  add_common(sequential, common);
  add_sequential(sequential, seq, common);

  auto* accelerated = app.add_subcommand("accelerated", "Accelerated sequential heuristic");
  add_common(accelerated, common);
  add_sequential(accelerated, seq, common);
  accelerated->add_option("--lambda", seq.lambda, "Fixed blend weight (default: backtracking)");

  double eta_probe = 1.0;
  auto* theory = app.add_subcommand("theory", "Penalty thresholds and constraint diagnostics");
  add_common(theory, common);
  theory->add_option("--start", common.start, "Point to analyze")
      ->check(CLI::IsMember({"zero", "reference"}));
  theory->add_option("--eta-probe", eta_probe, "Penalty used for the distance probe");

  int n = 4, m = 3, horizon = 81, stride = 4, sysid_rounds = 50;
  double sigma = 0.1, sysid_eta = 1.0, state_scale = sysid::kDefaultStateScale;
  auto* sysid_cmd = app.add_subcommand("sysid", "Identify a random LQR-controlled system");
  add_common(sysid_cmd, common, false);
  sysid_cmd->add_option("--n", n, "State dimension")->check(CLI::PositiveNumber);
  sysid_cmd->add_option("--m", m, "Input dimension")->check(CLI::PositiveNumber);
  sysid_cmd->add_option("--horizon", horizon, "Number of time steps")->check(CLI::Range(2, 1 << 20));
  sysid_cmd->add_option("--stride", stride, "Every stride-th state is observed")
      ->check(CLI::PositiveNumber);
  sysid_cmd->add_option("--sigma", sigma, "Input noise standard deviation");
  sysid_cmd->add_option("--eta", sysid_eta, "Penalty weight");
  sysid_cmd->add_option("--max-rounds", sysid_rounds, "Round cap");
  sysid_cmd->add_option("--state-scale", state_scale, "Hidden states are stored divided by this");

  std::string bench_dir;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* bench = app.add_subcommand("bench", "Relax and run every instance in a directory");
  add_common(bench, common, false);
  add_sequential(bench, seq, common);
  bench->add_option("dir", bench_dir, "Directory of .json/.qplib instances")->required();
  bench->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*relax) {
      emit(common, relax_json(io::read_instance(common.instance), common), nullptr);
    } else if (*sequential || *accelerated) {
      const io::InstanceDocument doc = io::read_instance(common.instance);
      const SeqResult r = run_seq(doc, common, seq, static_cast<bool>(*accelerated));
      const std::string csv = report::trace_csv(r.trace);
      if (common.out.empty()) std::cout << csv;
      emit(common, seq_summary(doc, r), &csv);
    } else if (*theory) {
      const io::InstanceDocument doc = io::read_instance(common.instance);
      const TheoryReport rep = analyze(doc.instance, pick_start(doc, common.start), eta_probe);
      emit(common, report::theory_json(rep), nullptr);
    } else if (*sysid_cmd) {
      return cmd_sysid(common, n, m, horizon, stride, sigma, sysid_eta, sysid_rounds, state_scale);
    } else if (*bench) {
      return cmd_bench(bench_dir, common, seq, threads);
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kInputError;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kInputError;
  } catch (const UnsupportedFeature& e) {
    std::cerr << e.what() << "\n";
    return kInputError;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverError;
  } catch (const EtaSearchFailed& e) {
    std::cerr << "eta search failed: " << e.what() << "\n";
    return kEtaError;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOk;
}
