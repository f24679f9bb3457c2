#ifndef PIE_SOLVER_HPP_
#define PIE_SOLVER_HPP_

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "pie/sdp.hpp"

namespace pie {

// Subprocess adapter around the bundled cvxpy script.  The script path can be
// overridden via the PIE_SOLVER environment variable; the compile-time default
// points at tools/solve_sdp.py in the source tree.
inline std::string solver_script_path() {
  if (const char* env = std::getenv("PIE_SOLVER")) return env;
#ifdef PIE_SOLVER_SCRIPT
  return PIE_SOLVER_SCRIPT;
#else
  return "tools/solve_sdp.py";
#endif
}

inline SdpSolution solve_sdp(const SdpProblem& p, const std::string& solver = "auto") {
  namespace fs = std::filesystem;
  std::mt19937_64 rng(std::random_device{}());
  fs::path dir = fs::temp_directory_path() / ("pie-sdp-" + std::to_string(rng()));
  fs::create_directories(dir);
  fs::path in = dir / "problem.json", out = dir / "result.json";

  {
    std::ofstream f(in);
    f << to_json(p);
  }

  std::string cmd = "python3 '" + solver_script_path() + "' '" + in.string() + "' '" +
                    out.string() + "' '" + solver + "' >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());

  SdpSolution sol;
  std::ifstream f(out);
  if (rc != 0 || !f) {
    sol.message = "solver adapter failed to run (" + solver_script_path() + ")";
    fs::remove_all(dir);
    return sol;
  }
  nlohmann::json j;
  f >> j;
  std::string status = j.at("status").get<std::string>();
  if (status == "solved") sol.status = SdpStatus::Solved;
  else if (status == "infeasible") sol.status = SdpStatus::Infeasible;
  else if (status == "unbounded") sol.status = SdpStatus::Unbounded;
  sol.message = j.value("message", "");
  if (sol.status == SdpStatus::Solved) {
    sol.objective = j.at("objective").get<double>();
    sol.values = j.at("values").get<std::vector<double>>();
    sol.eq_residual = j.at("eq_residual").get<double>();
    sol.psd_residual = j.at("psd_residual").get<double>();
    if (int(sol.values.size()) != p.n_vars()) {
      sol.status = SdpStatus::Failure;
      sol.message = "solver returned wrong variable count";
    }
  }
  fs::remove_all(dir);
  return sol;
}

}  // namespace pie

#endif  // PIE_SOLVER_HPP_
