#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>

#include <unistd.h>

#include <json.hpp>

#include "parabolic/conic_solver.h"
#include "parabolic/errors.h"

#ifndef PARABOLIC_PYTHON
#define PARABOLIC_PYTHON "python3"
#endif
#ifndef PARABOLIC_CLARABEL_SCRIPT
#define PARABOLIC_CLARABEL_SCRIPT "tools/clarabel_solve.py"
#endif

namespace parabolic {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'') {
      out += "'\\''";
    } else {
      out += ch;
    }
  }
  return out + "'";
}

json triplets(const SparseMatrix& M) {
  json out = json::array();
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
      out.push_back({it.row(), it.col(), it.value()});
    }
  }
  return out;
}

Vector to_vector(const json& j) {
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    v(static_cast<int>(i)) = j[i].is_null() ? std::nan("") : j[i].get<double>();
  }
  return v;
}

SolveStatus parse_status(const std::string& s) {
  if (s == "optimal") return SolveStatus::kOptimal;
  if (s == "infeasible") return SolveStatus::kInfeasible;
  if (s == "unbounded") return SolveStatus::kUnbounded;
  if (s == "max_iter") return SolveStatus::kMaxIter;
  return SolveStatus::kNumericFailure;
}

fs::path scratch_path(const char* tag) {
  static std::atomic<unsigned long> counter{0};
  std::ostringstream name;
  name << "parabolic_" << ::getpid() << '_' << counter++ << '_' << tag << ".json";
  return fs::temp_directory_path() / name.str();
}

ConeSolution solve_external(const ConeProgram& prog, const SolverSettings& settings) {
  settings.validate();
  json in;
  in["n"] = prog.num_vars();
  in["c"] = std::vector<double>(prog.c.data(), prog.c.data() + prog.c.size());
  in["A"] = triplets(prog.A);
  in["b"] = std::vector<double>(prog.b.data(), prog.b.data() + prog.b.size());
  in["G"] = triplets(prog.G);
  in["h"] = std::vector<double>(prog.h.data(), prog.h.data() + prog.h.size());
  in["num_nonneg"] = prog.num_nonneg;
  in["soc_dims"] = prog.soc_dims;
  in["tol_feas"] = settings.tol_feas;
  in["tol_gap"] = settings.tol_gap;
  in["max_iter"] = settings.max_iter;
  in["verbose"] = settings.verbose;

  const fs::path in_path = scratch_path("in");
  const fs::path out_path = scratch_path("out");
  {
    std::ofstream f(in_path);
    if (!f) throw SolverFailure("cannot write " + in_path.string());
    f << in.dump();
  }
  const std::string cmd = shell_quote(PARABOLIC_PYTHON) + " " +
                          shell_quote(PARABOLIC_CLARABEL_SCRIPT) + " " +
                          shell_quote(in_path.string()) + " " + shell_quote(out_path.string()) +
                          (settings.verbose ? "" : " 2>/dev/null");
  const int rc = std::system(cmd.c_str());
  fs::remove(in_path);
  if (rc != 0) {
    fs::remove(out_path);
    throw SolverFailure("external solver exited with status " + std::to_string(rc));
  }
  json out;
  {
    std::ifstream f(out_path);
    if (!f) throw SolverFailure("external solver produced no output");
    out = json::parse(f);
  }
  fs::remove(out_path);

  ConeSolution sol;
  sol.status = parse_status(out.at("status").get<std::string>());
  sol.x = to_vector(out.at("x"));
  sol.y = to_vector(out.at("y"));
  sol.z = to_vector(out.at("z"));
  sol.s = to_vector(out.at("s"));
  sol.iterations = out.at("iterations").get<int>();
  sol.time_s = out.at("time_s").get<double>();
  sol.pres = out.at("pres").get<double>();
  sol.dres = out.at("dres").get<double>();
  if (sol.x.size() == prog.num_vars() && sol.x.allFinite()) {
    sol.objective = prog.c.dot(sol.x) + prog.c0;
    sol.dual_objective = -prog.b.dot(sol.y) - prog.h.dot(sol.z) + prog.c0;
    sol.gap = std::abs(sol.objective - sol.dual_objective);
  } else if (sol.status == SolveStatus::kOptimal) {
    sol.status = SolveStatus::kNumericFailure;
  }
  return sol;
}

}  // namespace

ConeSolver external_solver() { return solve_external; }

bool external_solver_available() {
  static std::once_flag once;
  static bool available = false;
  std::call_once(once, [] {
    if (!fs::exists(PARABOLIC_CLARABEL_SCRIPT)) return;
    const std::string cmd =
        shell_quote(PARABOLIC_PYTHON) + " -c 'import clarabel, scipy' >/dev/null 2>&1";
    available = std::system(cmd.c_str()) == 0;
  });
  return available;
}

}  // namespace parabolic
