#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "pie/config.hpp"
#include "pie/sim.hpp"
#include "pie/synth.hpp"

using namespace pie;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumeric = 4;

struct LoadedSystem {
  PieSystem pie;
  SimSpec sim;
  bool from_gpde = false;
};

LoadedSystem load_system(const std::string& path) {
  if (!fs::exists(path)) throw std::invalid_argument("input file not found: " + path);
  LoadedSystem out;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    std::ifstream f(path);
    nlohmann::json j;
    f >> j;
    out.pie = pie_system_from_json(j);
  } else {
    GpdeConfig cfg = load_gpde_config(path);
    out.pie = convert_to_pie(cfg.sys);
    out.sim = cfg.sim;
    out.from_gpde = true;
  }
  return out;
}

void write_output(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream f(out_path);
    if (!f) throw std::invalid_argument("cannot write output file: " + out_path);
    f << j.dump(2) << '\n';
  }
}

SynthOptions make_synth_options(int degree, int max_degree, double eps, int grid,
                                const std::string& solver) {
  SynthOptions opt;
  opt.degree = degree;
  opt.max_degree = std::max(degree, max_degree);
  opt.eps = eps;
  opt.grid = grid;
  opt.solver = solver;
  return opt;
}

int synth_exit_code(const SynthesisResult& r) {
  if (r.ok) return kExitOk;
  if (r.status == SdpStatus::Infeasible) return kExitInfeasible;
  return kExitNumeric;
}

// Discretized gain from a synthesis report: prefer the polynomial form
// (re-discretized on the simulation grid), fall back to the stored grid form.
Eigen::MatrixXd gain_matrix(const nlohmann::json& gain, const ChebGrid& g) {
  if (gain.value("form", "grid") == "pi") {
    return discretize_op(pi_operator_from_json(gain.at("pi")), g);
  }
  const auto& rows = gain.at("grid");
  Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.at(0).size());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rows.at(i).at(j).get<double>();
  return m;
}

// One synthesized closed loop simulated from the H2-style initial condition
// T x(0) = B1 u0 with the *plant's* B1: for the controller that is the
// closed-loop disturbance channel, for the estimator it is the published
// convention of starting the error system at (minus) the plant's state.
SimResult simulate_closed_loop(const PieSystem& pie, const SynthesisResult& synth, bool estimator,
                               const SimOptions& opt) {
  DiscretizedPie d = discretize_pie(pie, opt.N);
  Eigen::MatrixXd G =
      synth.gain.has_pi ? discretize_op(synth.gain.pi, d.grid) : synth.gain.grid;
  DiscretizedPie cl = estimator ? close_estimator(d, G) : close_controller(d, G);
  Eigen::VectorXd u0 = Eigen::VectorXd::Constant(cl.nw, opt.u0_norm / std::sqrt(double(cl.nw)));
  SimOptions sim_opt = opt;
  sim_opt.u0_norm = opt.u0_norm;
  bool warned = false;
  Eigen::VectorXd x0 = fundamental_ic(cl, d.B1 * u0, &warned);
  SimResult r = simulate_ic(cl, x0, sim_opt);
  r.cond_warning = r.cond_warning || warned;
  return r;
}

int cmd_convert(const std::string& input, const std::string& out_path) {
  LoadedSystem sys = load_system(input);
  ValidationReport rep = validate_pie(sys.pie);
  nlohmann::json j = {{"schema", "convert-1"},
                      {"pie", to_json(sys.pie)},
                      {"valid", rep.ok},
                      {"issues", rep.issues}};
  write_output(j, out_path);
  return rep.ok ? kExitOk : kExitNumeric;
}

int cmd_h2norm(const std::string& input, bool dual, const SynthOptions& opt,
               const std::string& out_path, const std::string& sdpa_path) {
  LoadedSystem sys = load_system(input);
  SynthOptions o = opt;
  std::ofstream sdpa;
  if (!sdpa_path.empty()) {
    sdpa.open(sdpa_path);
    if (!sdpa) throw std::invalid_argument("cannot write SDPA file: " + sdpa_path);
    o.sdpa_out = &sdpa;
  }
  SynthesisResult r = dual ? h2_bound_dual(sys.pie, o) : h2_bound_primal(sys.pie, o);
  nlohmann::json j = to_json(r);
  j["schema"] = "h2norm-1";
  j["dual"] = dual;
  write_output(j, out_path);
  return synth_exit_code(r);
}

int cmd_synth(const std::string& input, bool estimator, const SynthOptions& opt,
              const std::string& out_path, const std::string& sdpa_path) {
  LoadedSystem sys = load_system(input);
  SynthOptions o = opt;
  std::ofstream sdpa;
  if (!sdpa_path.empty()) {
    sdpa.open(sdpa_path);
    if (!sdpa) throw std::invalid_argument("cannot write SDPA file: " + sdpa_path);
    o.sdpa_out = &sdpa;
  }
  SynthesisResult r = estimator ? h2_estimator(sys.pie, o) : h2_controller(sys.pie, o);
  nlohmann::json j = to_json(r);
  j["schema"] = estimator ? "estimator-1" : "controller-1";
  write_output(j, out_path);
  return synth_exit_code(r);
}

int cmd_simulate(const std::string& input, const std::string& gain_path,
                 const std::string& gain_role, const SimOptions& opt, const std::string& out_path,
                 const std::string& format) {
  LoadedSystem sys = load_system(input);
  DiscretizedPie d = discretize_pie(sys.pie, opt.N);
  SimResult r;
  if (!gain_path.empty()) {
    std::ifstream f(gain_path);
    if (!f) throw std::invalid_argument("cannot read gain file: " + gain_path);
    nlohmann::json gj;
    f >> gj;
    bool estimator = gain_role == "estimator" ||
                     (gain_role.empty() && gj.value("schema", "") == "estimator-1");
    Eigen::MatrixXd G = gain_matrix(gj.at("gain"), d.grid);
    DiscretizedPie cl = estimator ? close_estimator(d, G) : close_controller(d, G);
    Eigen::VectorXd u0 = Eigen::VectorXd::Constant(cl.nw, sys.sim.u0 / std::sqrt(double(std::max(1, cl.nw))));
    SimOptions so = opt;
    so.u0_norm = std::abs(sys.sim.u0);
    r = simulate_ic(cl, fundamental_ic(cl, d.B1 * u0), so);
    d = cl;
  } else if (sys.from_gpde && sys.sim.has_ic) {
    RL2Element state{Eigen::VectorXd::Zero(0), sys.sim.ic, sys.pie.dom};
    r = simulate_ic(d, ic_from_state(d, state), opt);
  } else {
    Eigen::VectorXd u0 = Eigen::VectorXd::Constant(d.nw, sys.sim.u0 / std::sqrt(double(std::max(1, d.nw))));
    SimOptions so = opt;
    so.u0_norm = std::abs(sys.sim.u0);
    r = simulate_ic(d, fundamental_ic(d, d.B1 * u0), so);
  }

  if (format == "csv") {
    if (out_path.empty()) {
      write_csv(r, d, std::cout);
    } else {
      std::ofstream f(out_path);
      if (!f) throw std::invalid_argument("cannot write output file: " + out_path);
      write_csv(r, d, f);
      std::ofstream mf(out_path + ".metrics.json");
      mf << metrics_json(r).dump(2) << '\n';
    }
  } else {
    nlohmann::json j = metrics_json(r);
    write_output(j, out_path);
  }
  return r.diverged ? kExitNumeric : kExitOk;
}

int cmd_repro(const std::string& example, const std::string& fixture_dir,
              const std::string& out_dir, const SynthOptions& synth_opt, const SimOptions& sim_opt) {
  fs::path fdir = fixture_dir;
  fs::path spec_path = fdir / ("repro_" + example + ".json");
  if (!fs::exists(spec_path)) throw std::invalid_argument("unknown example: " + example);
  nlohmann::json spec;
  {
    std::ifstream f(spec_path);
    f >> spec;
  }
  GpdeConfig cfg = load_gpde_config((fdir / spec.at("config").get<std::string>()).string());
  PieSystem pie = convert_to_pie(cfg.sys);

  if (!out_dir.empty()) fs::create_directories(out_dir);
  auto dump = [&](const std::string& name, const nlohmann::json& j) {
    if (out_dir.empty()) return;
    std::ofstream f(fs::path(out_dir) / name);
    f << j.dump(2) << '\n';
  };
  dump("pie.json", to_json(pie));

  nlohmann::json summary = {{"schema", "repro-summary-1"},
                            {"example", example},
                            {"rows", nlohmann::json::array()}};
  bool all_ok = true;
  std::printf("%-12s %10s %10s %8s %10s %10s %8s\n", "case", "gamma", "gamma_ref", "g_ok",
              "h2_sim", "h2_ref", "h2_ok");
  for (const auto& c : spec.at("cases")) {
    std::string role = c.at("role").get<std::string>();
    bool estimator = role == "estimator";
    SynthOptions so = synth_opt;
    so.grid = sim_opt.N;  // gains are applied on the simulation grid
    SynthesisResult r = estimator ? h2_estimator(pie, so) : h2_controller(pie, so);
    if (!r.ok) {
      std::fprintf(stderr, "repro %s: %s synthesis failed (%s)\n", example.c_str(), role.c_str(),
                   to_string(r.status));
      return r.status == SdpStatus::Infeasible ? kExitInfeasible : kExitNumeric;
    }
    dump(role + ".json", to_json(r));

    SimResult sim = simulate_closed_loop(pie, r, estimator, sim_opt);
    if (sim.diverged) {
      std::fprintf(stderr, "repro %s: %s closed-loop simulation diverged\n", example.c_str(),
                   role.c_str());
      return kExitNumeric;
    }

    double gref = c.at("gamma_ref").get<double>(), grtol = c.at("gamma_rtol").get<double>();
    double href = c.at("h2_ref").get<double>(), hrtol = c.at("h2_rtol").get<double>();
    bool g_ok = std::abs(r.gamma - gref) <= grtol * gref;
    bool h_ok = std::abs(sim.h2_estimate - href) <= hrtol * href;
    bool bound_ok = sim.h2_estimate <= r.gamma * 1.05;
    all_ok = all_ok && g_ok && h_ok && bound_ok;
    std::printf("%-12s %10.4f %10.2f %8s %10.4f %10.2f %8s\n", role.c_str(), r.gamma, gref,
                g_ok ? "pass" : "FAIL", sim.h2_estimate, href, h_ok && bound_ok ? "pass" : "FAIL");
    summary["rows"].push_back({{"role", role},
                               {"gamma", r.gamma},
                               {"gamma_ref", gref},
                               {"gamma_ok", g_ok},
                               {"h2_estimate", sim.h2_estimate},
                               {"h2_ref", href},
                               {"h2_ok", h_ok},
                               {"bound_ok", bound_ok},
                               {"degree", r.degree}});
  }
  summary["all_ok"] = all_ok;
  dump("summary.json", summary);
  return all_ok ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PIE toolkit: GPDE conversion, H2 analysis/synthesis, and simulation"};
  app.require_subcommand(1);

  std::string input, out_path, sdpa_path, solver = "auto", format = "json";
  std::string gain_path, gain_role, example;
  int degree = 2, max_degree = 4, grid = 32;
  double eps = 1e-4, dt = 1e-3, t_end = 10.0;
  bool dual = false;

  auto add_synth_flags = [&](CLI::App* c) {
    c->add_option("--degree", degree, "Gram degree (escalated up to --max-degree)");
    c->add_option("--max-degree", max_degree, "degree escalation ceiling");
    c->add_option("--eps", eps, "coercivity margin for positive operator variables");
    c->add_option("--grid", grid, "collocation size for gain inversion");
    c->add_option("--solver", solver, "SDP solver (auto|clarabel|scs)");
    c->add_option("--sdpa-out", sdpa_path, "write the compiled SDP in SDPA sparse format");
  };
  auto add_sim_flags = [&](CLI::App* c) {
    c->add_option("--grid", grid, "number of collocation points");
    c->add_option("--dt", dt, "backward Euler step")->check(CLI::PositiveNumber);
    c->add_option("--tend", t_end, "simulation horizon")->check(CLI::PositiveNumber);
  };

  CLI::App* convert = app.add_subcommand("convert", "convert a GPDE config to a PIE");
  convert->add_option("input", input)->required();
  convert->add_option("--out", out_path, "output file (default: stdout)");

  CLI::App* h2 = app.add_subcommand("h2norm", "compute an H2-norm upper bound");
  h2->add_option("input", input)->required();
  h2->add_flag("--dual", dual, "use the dual (controllability-side) LPI");
  h2->add_option("--out", out_path);
  add_synth_flags(h2);

  CLI::App* est = app.add_subcommand("estimator", "synthesize an H2-optimal estimator gain");
  est->add_option("input", input)->required();
  est->add_option("--out", out_path);
  add_synth_flags(est);

  CLI::App* ctl = app.add_subcommand("controller", "synthesize an H2-optimal state feedback");
  ctl->add_option("input", input)->required();
  ctl->add_option("--out", out_path);
  add_synth_flags(ctl);

  CLI::App* sim = app.add_subcommand("simulate", "backward Euler simulation");
  sim->add_option("input", input)->required();
  sim->add_option("--gain", gain_path, "synthesis report whose gain closes the loop");
  sim->add_option("--gain-role", gain_role, "estimator|controller (default: from report schema)");
  sim->add_option("--out", out_path);
  sim->add_option("--format", format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  add_sim_flags(sim);

  CLI::App* repro = app.add_subcommand("repro", "reproduce a bundled example end to end");
  repro->add_option("example", example, "rd|eb")->required();
  repro->add_option("--out", out_path, "artifact directory");
  repro->add_option("--degree", degree);
  repro->add_option("--max-degree", max_degree);
  repro->add_option("--eps", eps);
  repro->add_option("--solver", solver);
  add_sim_flags(repro);

  CLI11_PARSE(app, argc, argv);

  try {
    SynthOptions so = make_synth_options(degree, max_degree, eps, grid, solver);
    SimOptions mo;
    mo.N = grid;
    mo.dt = dt;
    mo.t_end = t_end;
    if (convert->parsed()) return cmd_convert(input, out_path);
    if (h2->parsed()) return cmd_h2norm(input, dual, so, out_path, sdpa_path);
    if (est->parsed()) return cmd_synth(input, true, so, out_path, sdpa_path);
    if (ctl->parsed()) return cmd_synth(input, false, so, out_path, sdpa_path);
    if (sim->parsed()) return cmd_simulate(input, gain_path, gain_role, mo, out_path, format);
    if (repro->parsed()) return cmd_repro(example, PIE_FIXTURE_DIR, out_path, so, mo);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitInput;
}
