#ifndef PIE_SIM_HPP_
#define PIE_SIM_HPP_

#include <limits>
#include <ostream>
#include <string>

#include "pie/cheb.hpp"
#include "pie/gpde.hpp"

namespace pie {

struct SimOptions {
  int N = 32;
  double dt = 1e-3;
  double t_end = 10.0;
  double u0_norm = 1.0;  // divisor for the H2-style estimate
};

// All system operators sampled on one collocation grid.  Vectors follow the
// discretize_op layout: finite part, then N samples per function channel.
struct DiscretizedPie {
  ChebGrid grid;
  int m = 0, n = 0;  // state dims
  int nw = 0, nu = 0, nz = 0, ny = 0;
  Eigen::MatrixXd T, A, B1, B2, C1, C2;
  Eigen::MatrixXd D12, D21;
  double cond_T = 0.0;
};

inline DiscretizedPie discretize_pie(const PieSystem& pie, int N) {
  if (N < 8) throw std::invalid_argument("discretize_pie: need at least 8 nodes");
  DiscretizedPie d;
  d.grid = make_cheb_grid(N, pie.dom);
  d.m = pie.state_m();
  d.n = pie.state_n();
  d.nw = pie.nw;
  d.nu = pie.nu;
  d.nz = pie.nz;
  d.ny = pie.ny;
  d.T = discretize_op(pie.T, d.grid);
  d.A = discretize_op(pie.A, d.grid);
  d.B1 = discretize_op(pie.B1, d.grid);
  d.B2 = discretize_op(pie.B2, d.grid);
  d.C1 = discretize_op(pie.C1, d.grid);
  d.C2 = discretize_op(pie.C2, d.grid);
  d.D12 = pie.D12;
  d.D21 = pie.D21;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d.T);
  double smin = svd.singularValues().minCoeff();
  d.cond_T = smin > 0.0 ? svd.singularValues().maxCoeff() / smin
                        : std::numeric_limits<double>::infinity();
  return d;
}

// Closed loops at the grid level, so synthesized gains can be used whether or
// not they reconstructed to polynomial kernels.
inline DiscretizedPie close_estimator(const DiscretizedPie& d, const Eigen::MatrixXd& L) {
  if (L.rows() != d.T.rows() || L.cols() != d.ny)
    throw std::invalid_argument("close_estimator: gain dimensions do not match");
  DiscretizedPie cl = d;
  cl.A = d.A + L * d.C2;
  cl.B1 = -(d.B1 + L * d.D21);
  cl.nu = 0;
  cl.ny = 0;
  cl.B2.resize(d.T.rows(), 0);
  cl.C2.resize(0, d.T.cols());
  cl.D12.resize(d.nz, 0);
  cl.D21.resize(0, d.nw);
  return cl;
}

inline DiscretizedPie close_controller(const DiscretizedPie& d, const Eigen::MatrixXd& K) {
  if (K.rows() != d.nu || K.cols() != d.T.cols())
    throw std::invalid_argument("close_controller: gain dimensions do not match");
  DiscretizedPie cl = d;
  cl.A = d.A + d.B2 * K;
  cl.C1 = d.C1 + d.D12 * K;
  cl.nu = 0;
  cl.ny = 0;
  cl.B2.resize(d.T.rows(), 0);
  cl.C2.resize(0, d.T.cols());
  cl.D12.resize(d.nz, 0);
  cl.D21.resize(0, d.nw);
  return cl;
}

// Weighted inner product matching rl2_inner on the grid.
inline double grid_inner(const DiscretizedPie& d, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& v) {
  double acc = u.head(d.m).dot(v.head(d.m));
  for (int j = 0; j < d.n; ++j) {
    int off = d.m + j * d.grid.N;
    for (int k = 0; k < d.grid.N; ++k) acc += d.grid.w(k) * u(off + k) * v(off + k);
  }
  return acc;
}

struct SimResult {
  Eigen::VectorXd t;
  Eigen::MatrixXd x;  // state snapshots, one column per time
  Eigen::MatrixXd z;  // outputs, one column per time
  double dt = 0.0;
  double u0_norm = 1.0;
  double z_l2 = 0.0;
  double tail_energy = 0.0;
  double h2_estimate = 0.0;
  bool reliable = true;
  bool diverged = false;
  bool cond_warning = false;
  double step_cond = 0.0;
  std::string message;
};

// Trapezoidal ||z||_{L2} over the horizon plus a geometric tail estimate from
// the terminal decay rate; flags the estimate unreliable when the tail is not
// clearly decaying or still carries real energy.
inline double h2_numeric(SimResult& r) {
  const int K = int(r.z.cols());
  double total = 0.0;
  for (int k = 0; k + 1 < K; ++k)
    total += 0.5 * r.dt * (r.z.col(k).squaredNorm() + r.z.col(k + 1).squaredNorm());
  int win = std::max(2, K / 10);
  double e_last = 0.0, e_prev = 0.0;
  for (int k = std::max(0, K - win); k < K; ++k) e_last += r.dt * r.z.col(k).squaredNorm();
  for (int k = std::max(0, K - 2 * win); k < K - win; ++k) e_prev += r.dt * r.z.col(k).squaredNorm();
  r.tail_energy = 0.0;
  r.reliable = !r.diverged;
  if (e_last > 1e-14 * std::max(total, 1e-300)) {
    if (e_prev > 0.0 && e_last < e_prev) {
      double ratio = e_last / e_prev;
      r.tail_energy = e_last * ratio / (1.0 - ratio);
      if (r.tail_energy > 0.05 * std::max(total, 1e-300)) r.reliable = false;
    } else {
      r.reliable = false;  // non-decaying terminal window
    }
  }
  r.z_l2 = std::sqrt(total + r.tail_energy);
  r.h2_estimate = r.z_l2 / r.u0_norm;
  return r.h2_estimate;
}

// Backward Euler on T xdot = A x from a fundamental-state initial condition:
// (T - dt A) x_{k+1} = T x_k, z_k = C1 x_k.
inline SimResult simulate_ic(const DiscretizedPie& d, const Eigen::VectorXd& x0,
                             const SimOptions& opt = {}) {
  if (!(opt.dt > 0.0) || !(opt.t_end > 0.0))
    throw std::invalid_argument("simulate_ic: dt and t_end must be positive");
  if (x0.size() != d.T.cols()) throw std::invalid_argument("simulate_ic: initial state size mismatch");
  const int K = int(std::llround(opt.t_end / opt.dt));
  SimResult r;
  r.dt = opt.dt;
  r.u0_norm = opt.u0_norm;
  r.t.resize(K + 1);
  r.x.resize(x0.size(), K + 1);
  r.z.resize(d.C1.rows(), K + 1);

  Eigen::MatrixXd M = d.T - opt.dt * d.A;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  double smin = svd.singularValues().minCoeff();
  r.step_cond = smin > 0.0 ? svd.singularValues().maxCoeff() / smin
                           : std::numeric_limits<double>::infinity();
  bool regularized = !(r.step_cond < 1e12);
  r.cond_warning = regularized;
  if (regularized) r.message = "near-singular step matrix, Tikhonov-regularized least squares";
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  if (regularized) {
    double lam = std::max(1e-12, 1e-12 * M.cwiseAbs().maxCoeff());
    ldlt.compute(M.transpose() * M +
                 lam * Eigen::MatrixXd::Identity(M.cols(), M.cols()));
  } else {
    lu.compute(M);
  }

  const double cap = 1e12 * std::max(1.0, x0.norm());
  Eigen::VectorXd x = x0;
  for (int k = 0; k <= K; ++k) {
    r.t(k) = k * opt.dt;
    r.x.col(k) = x;
    r.z.col(k) = d.C1 * x;
    if (k == K) break;
    Eigen::VectorXd rhs = d.T * x;
    x = regularized ? ldlt.solve(M.transpose() * rhs).eval() : lu.solve(rhs).eval();
    if (!x.allFinite() || x.norm() > cap) {
      r.diverged = true;
      r.message = "trajectory diverged at t=" + std::to_string((k + 1) * opt.dt);
      int kept = k + 2;
      r.t.conservativeResize(kept);
      r.x.conservativeResize(Eigen::NoChange, kept);
      r.z.conservativeResize(Eigen::NoChange, kept);
      r.x.col(kept - 1) = x.allFinite() ? x : Eigen::VectorXd::Zero(x.size());
      r.z.col(kept - 1) = d.C1 * r.x.col(kept - 1);
      break;
    }
  }
  h2_numeric(r);
  return r;
}

// Least-squares fundamental state solving T xbar = target (Tikhonov floor when
// T_h is near-singular, which it often is since T integrates).
inline Eigen::VectorXd fundamental_ic(const DiscretizedPie& d, const Eigen::VectorXd& target,
                                      bool* cond_warning = nullptr) {
  if (target.size() != d.T.rows()) throw std::invalid_argument("fundamental_ic: target size mismatch");
  bool bad = !(d.cond_T < 1e12);
  if (cond_warning) *cond_warning = bad;
  if (bad) {
    double lam = std::max(1e-12, 1e-12 * d.T.cwiseAbs().maxCoeff());
    return (d.T.transpose() * d.T +
            lam * Eigen::MatrixXd::Identity(d.T.cols(), d.T.cols()))
        .ldlt()
        .solve(d.T.transpose() * target);
  }
  return d.T.colPivHouseholderQr().solve(target);
}

// H2-style initial condition T x(0) = B1 u0.
inline Eigen::VectorXd ic_from_u0(const DiscretizedPie& d, const Eigen::VectorXd& u0,
                                  bool* cond_warning = nullptr) {
  return fundamental_ic(d, d.B1 * u0, cond_warning);
}

// Initial condition from samples of the PDE state x(s): T xbar(0) = x.
inline Eigen::VectorXd ic_from_state(const DiscretizedPie& d, const RL2Element& state,
                                     bool* cond_warning = nullptr) {
  return fundamental_ic(d, sample_element(state, d.grid), cond_warning);
}

// Dual relation between initial conditions: with T xdot = A x from x0 and
// T* xbardot = A* xbar from xbar0, <T* xbar0, x(t)> = <xbar(t), T x0> for all
// t.  Returns the largest deviation over the horizon.
inline double intertwining_check(const PieSystem& pie, const RL2Element& x0,
                                 const RL2Element& xbar0, const SimOptions& opt = {}) {
  PieSystem dual = pie;
  dual.T = pi_adjoint(pie.T);
  dual.A = pi_adjoint(pie.A);
  DiscretizedPie dp = discretize_pie(pie, opt.N);
  DiscretizedPie dd = discretize_pie(dual, opt.N);

  SimResult primal = simulate_ic(dp, sample_element(x0, dp.grid), opt);
  SimResult adj = simulate_ic(dd, sample_element(xbar0, dd.grid), opt);
  if (primal.diverged || adj.diverged)
    throw std::runtime_error("intertwining_check: simulation diverged");

  Eigen::VectorXd lhs_fixed = sample_element(pi_apply(pi_adjoint(pie.T), xbar0), dp.grid);
  Eigen::VectorXd rhs_fixed = sample_element(pi_apply(pie.T, x0), dp.grid);
  double dev = 0.0;
  for (int k = 0; k < primal.t.size(); ++k) {
    double lhs = grid_inner(dp, lhs_fixed, primal.x.col(k));
    double rhs = grid_inner(dp, adj.x.col(k), rhs_fixed);
    dev = std::max(dev, std::abs(lhs - rhs));
  }
  return dev;
}

// --- output ------------------------------------------------------------------

inline void write_csv(const SimResult& r, const DiscretizedPie& d, std::ostream& out) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };
  out << "t";
  for (int i = 0; i < d.m; ++i) out << ",r" << i + 1;
  for (int j = 0; j < d.n; ++j)
    for (int k = 0; k < d.grid.N; ++k) out << ",x" << j + 1 << "_s" << num(d.grid.s(k));
  for (int i = 0; i < r.z.rows(); ++i) out << ",z" << i + 1;
  out << '\n';
  for (int k = 0; k < r.t.size(); ++k) {
    out << num(r.t(k));
    for (int i = 0; i < r.x.rows(); ++i) out << ',' << num(r.x(i, k));
    for (int i = 0; i < r.z.rows(); ++i) out << ',' << num(r.z(i, k));
    out << '\n';
  }
}

inline nlohmann::json metrics_json(const SimResult& r) {
  return {{"schema", "sim-metrics-1"},
          {"h2_estimate", r.h2_estimate},
          {"z_l2", r.z_l2},
          {"tail_energy", r.tail_energy},
          {"u0_norm", r.u0_norm},
          {"dt", r.dt},
          {"t_end", r.t.size() > 0 ? r.t(r.t.size() - 1) : 0.0},
          {"reliable", r.reliable},
          {"diverged", r.diverged},
          {"cond_warning", r.cond_warning},
          {"step_cond", r.step_cond},
          {"message", r.message}};
}

}  // namespace pie

#endif  // PIE_SIM_HPP_
