#ifndef PIE_SYNTH_HPP_
#define PIE_SYNTH_HPP_

#include <limits>
#include <optional>
#include <string>

#include "pie/cheb.hpp"
#include "pie/gpde.hpp"
#include "pie/lpi.hpp"
#include "pie/solver.hpp"

namespace pie {

struct SynthOptions {
  int degree = 2;       // Gram degree for the Lyapunov-type operator
  int max_degree = 4;   // degree escalation ceiling on infeasibility
  int z_degree = -1;    // kernel degree for the gain variable (-1: degree + 1)
  double eps = 1e-4;
  std::string solver = "auto";
  int grid = 32;        // collocation size for gain inversion
  int fit_degree = 8;   // polynomial fit degree for reconstructed gains
  std::optional<std::ostream*> sdpa_out;  // optional SDPA sparse dump
};

struct GainResult {
  Eigen::MatrixXd grid;  // discretized gain in the cheb layout
  bool has_pi = false;
  PIOperator pi;
  double fit_residual = std::numeric_limits<double>::infinity();
  double solve_residual = 0.0;
  double cond = 0.0;
};

struct SynthesisResult {
  bool ok = false;
  double gamma = 0.0;
  PIOperator P_op, Z_op;
  Eigen::MatrixXd W;
  GainResult gain;
  int degree = 0;
  SdpStatus status = SdpStatus::Failure;
  double eq_residual = 0.0, psd_residual = 0.0;
  std::string message;
};

namespace detail {

inline void maybe_dump_sdpa(LpiProblem& lp, const SynthOptions& opt) {
  if (opt.sdpa_out && *opt.sdpa_out) export_sdpa(lp.sdp(), **opt.sdpa_out);
}

inline void fill_diagnostics(SynthesisResult& r, const SdpSolution& sol, int degree) {
  r.degree = degree;
  r.status = sol.status;
  r.eq_residual = sol.eq_residual;
  r.psd_residual = sol.psd_residual;
  r.message = sol.message;
}

// Chebyshev polynomials of the mapped variable u = (2s - a - b)/(b - a), used
// as a well-conditioned least-squares basis that converts back to monomials.
inline std::vector<PolyScalar> cheb_poly_basis(int d, Domain dom) {
  std::vector<PolyScalar> T;
  PolyScalar u = PolyScalar::var_s(dom).scaled(2.0 / dom.width()) +
                 PolyScalar(-(dom.a + dom.b) / dom.width(), dom);
  T.push_back(PolyScalar(1.0, dom));
  if (d >= 1) T.push_back(u);
  for (int k = 2; k <= d; ++k) T.push_back(u.scaled(2.0) * T[k - 1] - T[k - 2]);
  return T;
}

// Fit samples y(s_i) by a polynomial of degree <= d; returns the polynomial
// and the max pointwise residual.
inline std::pair<PolyScalar, double> fit_poly(const Eigen::VectorXd& y, const ChebGrid& g, int d) {
  d = std::min(d, g.N - 1);
  std::vector<PolyScalar> basis = cheb_poly_basis(d, g.dom);
  Eigen::MatrixXd V(g.N, d + 1);
  for (int i = 0; i < g.N; ++i)
    for (int k = 0; k <= d; ++k) V(i, k) = basis[k].eval(g.s(i), 0.0);
  Eigen::VectorXd c = V.colPivHouseholderQr().solve(y);
  PolyScalar p(g.dom);
  for (int k = 0; k <= d; ++k) p = p + basis[k].scaled(c(k));
  double resid = (V * c - y).cwiseAbs().maxCoeff();
  return {p, resid};
}

}  // namespace detail

// Solve P_h G = Z_h (left, gains L = P^{-1}Z) or G P_h = Z_h (right,
// K = Z P^{-1}) on the grid, then try to fit polynomial kernels back.
inline GainResult invert_gain(const PIOperator& P_op, const PIOperator& Z_op, bool left,
                              const ChebGrid& g, int fit_degree = 8) {
  GainResult r;
  Eigen::MatrixXd Ph = discretize_op(P_op, g);
  Eigen::MatrixXd Zh = discretize_op(Z_op, g);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ph);
  double smin = svd.singularValues().minCoeff(), smax = svd.singularValues().maxCoeff();
  r.cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(r.cond < 1e10))
    throw std::runtime_error("invert_gain: discretized certificate is numerically singular (cond " +
                             std::to_string(r.cond) + ")");
  if (left) {
    r.grid = Ph.colPivHouseholderQr().solve(Zh);
    r.solve_residual = (Ph * r.grid - Zh).cwiseAbs().maxCoeff() /
                       std::max(1.0, Zh.cwiseAbs().maxCoeff());
  } else {
    r.grid = Ph.transpose().colPivHouseholderQr().solve(Zh.transpose()).transpose();
    r.solve_residual = (r.grid * Ph - Zh).cwiseAbs().maxCoeff() /
                       std::max(1.0, Zh.cwiseAbs().maxCoeff());
  }

  // attempt a polynomial reconstruction with the gain's natural structure
  const double fit_tol = 1e-3;
  double worst = 0.0;
  if (left) {
    // Z: R^{k} -> state; kernels are the Q2 columns sampled on the grid
    PIOperator pi = PIOperator::zero(Z_op.m1, 0, Z_op.m2, Z_op.n2, g.dom);
    pi.P = r.grid.topRows(Z_op.m2);
    for (int i = 0; i < Z_op.n2; ++i)
      for (int j = 0; j < Z_op.m1; ++j) {
        auto [p, resid] = detail::fit_poly(r.grid.col(j).segment(Z_op.m2 + i * g.N, g.N), g, fit_degree);
        pi.Q2.at(i, j) = p;
        worst = std::max(worst, resid);
      }
    if (worst <= fit_tol) {
      r.has_pi = true;
      r.pi = pi;
    }
  } else {
    // Z: state -> R^{k}; kernels are Q1 rows, samples carry quadrature weights
    PIOperator pi = PIOperator::zero(Z_op.m1, Z_op.n1, Z_op.m2, 0, g.dom);
    pi.P = r.grid.leftCols(Z_op.m1);
    for (int i = 0; i < Z_op.m2; ++i)
      for (int j = 0; j < Z_op.n1; ++j) {
        Eigen::VectorXd q1 = r.grid.row(i).segment(Z_op.m1 + j * g.N, g.N).transpose();
        for (int p = 0; p < g.N; ++p) q1(p) /= g.w(p);
        auto [p, resid] = detail::fit_poly(q1, g, fit_degree);
        pi.Q1.at(i, j) = p;
        worst = std::max(worst, resid);
      }
    if (worst <= fit_tol) {
      r.has_pi = true;
      r.pi = pi;
    }
  }
  r.fit_residual = worst;
  return r;
}

// --- analysis ----------------------------------------------------------------

struct StabilityResult {
  bool certified = false;
  PIOperator P_op;
  int degree = 0;
  SdpStatus status = SdpStatus::Failure;
  std::string message;
};

inline StabilityResult stability_lpi(const PieSystem& pie, const SynthOptions& opt = {}) {
  limits::DegreeGuard guard(64);
  StabilityResult result;
  const int m = pie.state_m(), n = pie.state_n();
  // The stability LPI is homogeneous in P, so the coercivity floor can be
  // normalized to 1.  A small floor (1e-4) makes infeasible instances only
  // marginally infeasible and solvers stall on them.
  const double eps_margin = std::max(opt.eps, 1.0);
  for (int d = opt.degree; d <= opt.max_degree; ++d) {
    LpiProblem lp(pie.dom);
    AffineOp P = lp.pos_op_var("P", m, n, d, eps_margin);
    AffineOp e = affine_add(affine_compose(pi_adjoint(pie.A), affine_compose(P, pie.T)),
                            affine_compose(pi_adjoint(pie.T), affine_compose(P, pie.A)));
    lp.enforce_nsd(e);
    detail::maybe_dump_sdpa(lp, opt);
    SdpSolution sol = solve_sdp(lp.compile(), opt.solver);
    result.degree = d;
    result.status = sol.status;
    result.message = sol.message;
    if (sol.status == SdpStatus::Solved) {
      result.certified = true;
      result.P_op = lp.reconstruct(P, sol);
      return result;
    }
    if (sol.status == SdpStatus::Failure) return result;
  }
  return result;
}

inline SynthesisResult h2_bound_primal(const PieSystem& pie, const SynthOptions& opt = {}) {
  limits::DegreeGuard guard(64);
  SynthesisResult r;
  for (int d = opt.degree; d <= opt.max_degree; ++d) {
    LpiProblem lp(pie.dom);
    AffineOp P = lp.pos_op_var("P", pie.state_m(), pie.state_n(), d, opt.eps);
    AffineOp e = affine_add(affine_compose(pi_adjoint(pie.T), affine_compose(P, pie.A)),
                            affine_compose(pi_adjoint(pie.A), affine_compose(P, pie.T)));
    e = affine_add(e, affine_const(pi_compose(pi_adjoint(pie.C1), pie.C1)));
    lp.enforce_nsd(e);
    int rho = lp.free_var("rho");
    lp.trace_le(affine_compose(pi_adjoint(pie.B1), affine_compose(P, pie.B1)), rho);
    lp.minimize(rho);
    detail::maybe_dump_sdpa(lp, opt);
    SdpSolution sol = solve_sdp(lp.compile(), opt.solver);
    detail::fill_diagnostics(r, sol, d);
    if (sol.status == SdpStatus::Solved) {
      r.ok = true;
      r.gamma = std::sqrt(std::max(0.0, solution_value(lp.sdp(), sol, rho)));
      r.P_op = lp.reconstruct(P, sol);
      return r;
    }
    if (sol.status == SdpStatus::Failure) return r;
  }
  return r;
}

inline SynthesisResult h2_bound_dual(const PieSystem& pie, const SynthOptions& opt = {}) {
  limits::DegreeGuard guard(64);
  SynthesisResult r;
  for (int d = opt.degree; d <= opt.max_degree; ++d) {
    LpiProblem lp(pie.dom);
    AffineOp P = lp.pos_op_var("P", pie.state_m(), pie.state_n(), d, opt.eps);
    AffineOp e = affine_add(affine_compose(pie.T, affine_compose(P, pi_adjoint(pie.A))),
                            affine_compose(pie.A, affine_compose(P, pi_adjoint(pie.T))));
    e = affine_add(e, affine_const(pi_compose(pie.B1, pi_adjoint(pie.B1))));
    lp.enforce_nsd(e);
    int rho = lp.free_var("rho");
    lp.trace_le(affine_compose(pie.C1, affine_compose(P, pi_adjoint(pie.C1))), rho);
    lp.minimize(rho);
    detail::maybe_dump_sdpa(lp, opt);
    SdpSolution sol = solve_sdp(lp.compile(), opt.solver);
    detail::fill_diagnostics(r, sol, d);
    if (sol.status == SdpStatus::Solved) {
      r.ok = true;
      r.gamma = std::sqrt(std::max(0.0, solution_value(lp.sdp(), sol, rho)));
      r.P_op = lp.reconstruct(P, sol);
      return r;
    }
    if (sol.status == SdpStatus::Failure) return r;
  }
  return r;
}

// --- synthesis ---------------------------------------------------------------

inline SynthesisResult h2_estimator(const PieSystem& pie, const SynthOptions& opt = {}) {
  limits::DegreeGuard guard(64);
  if (pie.ny == 0) throw std::invalid_argument("h2_estimator: system has no observed output");
  SynthesisResult r;
  const int m = pie.state_m(), n = pie.state_n();
  for (int d = opt.degree; d <= opt.max_degree; ++d) {
    int dz = opt.z_degree >= 0 ? opt.z_degree : d + 1;
    LpiProblem lp(pie.dom);
    AffineOp P = lp.pos_op_var("P", m, n, d, opt.eps);
    AffineOp Z = lp.indefinite_op_var("Z", pie.ny, 0, m, n, dz);

    AffineOp e = affine_add(affine_compose(pi_adjoint(pie.T), affine_compose(P, pie.A)),
                            affine_compose(pi_adjoint(pie.A), affine_compose(P, pie.T)));
    AffineOp zc = affine_compose(pi_adjoint(pie.T), affine_compose(Z, pie.C2));
    e = affine_add(e, affine_add(zc, affine_adjoint(zc)));
    e = affine_add(e, affine_const(pi_compose(pi_adjoint(pie.C1), pie.C1)));
    lp.enforce_nsd(e);

    // [W  X*; X  P] >= 0 with X = -(P B1 + Z D21)
    AffineOp X = affine_scale(
        affine_add(affine_compose(P, pie.B1),
                   affine_compose(Z, PIOperator::from_matrix(pie.D21, pie.dom))),
        -1.0);
    AffineOp W = lp.psd_matrix_var("W", pie.nw);
    AffineOp block = affine_vert(affine_horz(W, affine_adjoint(X)), affine_horz(X, P));
    lp.enforce_psd(block);

    int rho = lp.free_var("rho");
    lp.trace_le(W, rho);
    lp.minimize(rho);
    detail::maybe_dump_sdpa(lp, opt);
    SdpSolution sol = solve_sdp(lp.compile(), opt.solver);
    detail::fill_diagnostics(r, sol, d);
    if (sol.status == SdpStatus::Solved) {
      r.ok = true;
      r.gamma = std::sqrt(std::max(0.0, solution_value(lp.sdp(), sol, rho)));
      r.P_op = lp.reconstruct(P, sol);
      r.Z_op = lp.reconstruct(Z, sol);
      r.W = lp.reconstruct(W, sol).P;
      r.gain = invert_gain(r.P_op, r.Z_op, /*left=*/true, make_cheb_grid(opt.grid, pie.dom),
                           opt.fit_degree);
      return r;
    }
    if (sol.status == SdpStatus::Failure) return r;
  }
  return r;
}

inline SynthesisResult h2_controller(const PieSystem& pie, const SynthOptions& opt = {}) {
  limits::DegreeGuard guard(64);
  if (pie.nu == 0) throw std::invalid_argument("h2_controller: system has no control input");
  SynthesisResult r;
  const int m = pie.state_m(), n = pie.state_n();
  for (int d = opt.degree; d <= opt.max_degree; ++d) {
    int dz = opt.z_degree >= 0 ? opt.z_degree : d + 1;
    LpiProblem lp(pie.dom);
    AffineOp P = lp.pos_op_var("P", m, n, d, opt.eps);
    AffineOp Z = lp.indefinite_op_var("Z", m, n, pie.nu, 0, dz);

    AffineOp e = affine_add(affine_compose(pie.A, affine_compose(P, pi_adjoint(pie.T))),
                            affine_compose(pie.T, affine_compose(P, pi_adjoint(pie.A))));
    AffineOp bz = affine_compose(pie.B2, affine_compose(Z, pi_adjoint(pie.T)));
    e = affine_add(e, affine_add(bz, affine_adjoint(bz)));
    e = affine_add(e, affine_const(pi_compose(pie.B1, pi_adjoint(pie.B1))));
    lp.enforce_nsd(e);

    // [W  X; X*  P] >= 0 with X = C1 P + D12 Z
    AffineOp X = affine_add(affine_compose(pie.C1, P),
                            affine_compose(PIOperator::from_matrix(pie.D12, pie.dom), Z));
    AffineOp W = lp.psd_matrix_var("W", pie.nz);
    AffineOp block = affine_vert(affine_horz(W, X), affine_horz(affine_adjoint(X), P));
    lp.enforce_psd(block);

    int rho = lp.free_var("rho");
    lp.trace_le(W, rho);
    lp.minimize(rho);
    detail::maybe_dump_sdpa(lp, opt);
    SdpSolution sol = solve_sdp(lp.compile(), opt.solver);
    detail::fill_diagnostics(r, sol, d);
    if (sol.status == SdpStatus::Solved) {
      r.ok = true;
      r.gamma = std::sqrt(std::max(0.0, solution_value(lp.sdp(), sol, rho)));
      r.P_op = lp.reconstruct(P, sol);
      r.Z_op = lp.reconstruct(Z, sol);
      r.W = lp.reconstruct(W, sol).P;
      r.gain = invert_gain(r.P_op, r.Z_op, /*left=*/false, make_cheb_grid(opt.grid, pie.dom),
                           opt.fit_degree);
      return r;
    }
    if (sol.status == SdpStatus::Failure) return r;
  }
  return r;
}

// --- closed loops (operator form) -------------------------------------------

inline PieSystem closed_loop_estimator(const PieSystem& pie, const PIOperator& L) {
  PieSystem cl = pie;
  cl.A = pi_add(pie.A, pi_compose(L, pie.C2));
  cl.B1 = pi_scale(
      pi_add(pie.B1, pi_compose(L, PIOperator::from_matrix(pie.D21, pie.dom))), -1.0);
  cl.nu = 0;
  cl.ny = 0;
  cl.B2 = PIOperator::zero(0, 0, cl.state_m(), cl.state_n(), pie.dom);
  cl.C2 = PIOperator::zero(cl.state_m(), cl.state_n(), 0, 0, pie.dom);
  cl.D12 = Eigen::MatrixXd::Zero(cl.nz, 0);
  cl.D21 = Eigen::MatrixXd::Zero(0, cl.nw);
  return cl;
}

inline PieSystem closed_loop_controller(const PieSystem& pie, const PIOperator& K) {
  PieSystem cl = pie;
  cl.A = pi_add(pie.A, pi_compose(pie.B2, K));
  cl.C1 = pi_add(pie.C1, pi_compose(PIOperator::from_matrix(pie.D12, pie.dom), K));
  cl.nu = 0;
  cl.ny = 0;
  cl.B2 = PIOperator::zero(0, 0, cl.state_m(), cl.state_n(), pie.dom);
  cl.C2 = PIOperator::zero(cl.state_m(), cl.state_n(), 0, 0, pie.dom);
  cl.D12 = Eigen::MatrixXd::Zero(cl.nz, 0);
  cl.D21 = Eigen::MatrixXd::Zero(0, cl.nw);
  return cl;
}

// --- reports -----------------------------------------------------------------

inline nlohmann::json to_json(const GainResult& g) {
  nlohmann::json j = {{"fit_residual", g.fit_residual},
                      {"solve_residual", g.solve_residual},
                      {"cond", g.cond},
                      {"form", g.has_pi ? "pi" : "grid"}};
  if (g.has_pi) j["pi"] = to_json(g.pi);
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < g.grid.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < g.grid.cols(); ++c) row.push_back(g.grid(i, c));
    rows.push_back(row);
  }
  j["grid"] = rows;
  return j;
}

inline nlohmann::json to_json(const SynthesisResult& r) {
  nlohmann::json j = {{"schema", "synth-1"},
                      {"ok", r.ok},
                      {"gamma", r.gamma},
                      {"degree", r.degree},
                      {"status", to_string(r.status)},
                      {"eq_residual", r.eq_residual},
                      {"psd_residual", r.psd_residual},
                      {"message", r.message}};
  if (r.ok) {
    j["P"] = to_json(r.P_op);
    if (!r.Z_op.is_zero() || r.Z_op.m1 + r.Z_op.n1 > 0) j["Z"] = to_json(r.Z_op);
    j["gain"] = to_json(r.gain);
  }
  return j;
}

}  // namespace pie

#endif  // PIE_SYNTH_HPP_
