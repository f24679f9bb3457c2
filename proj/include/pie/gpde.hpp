#ifndef PIE_GPDE_HPP_
#define PIE_GPDE_HPP_

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pie/piop.hpp"

namespace pie {

// Linear PDE in one spatial variable:
//   xdot = sum_i A_i(s) d^i x + b1(s) w + b2(s) u
//   z    = int_a^b sum_i Cz_i(s) d^i x ds + D12 u
//   y    = Cy * boundary_trace + D21 w
//   Bb * boundary_trace = 0
// with boundary trace (x(a), ..., d^{N-1}x(a), x(b), ..., d^{N-1}x(b)),
// each entry a block of state width.
struct GpdeSystem {
  Domain dom;
  int n_x = 1;    // state width
  int order = 2;  // differentiability order N (1 or 2)

  std::vector<PolyMatrix> A;   // order+1 entries, each n_x x n_x in s
  PolyMatrix b1, b2;           // n_x x nw, n_x x nu in s
  Eigen::MatrixXd Bb;          // N*n_x x 2*N*n_x
  std::vector<PolyMatrix> Cz;  // order+1 entries, each nz x n_x in s
  Eigen::MatrixXd D12;         // nz x nu
  Eigen::MatrixXd Cy;          // ny x 2*N*n_x
  Eigen::MatrixXd D21;         // ny x nw

  int nw() const { return b1.cols(); }
  int nu() const { return b2.cols(); }
  int nz() const { return int(D12.rows()); }
  int ny() const { return int(D21.rows()); }
  int trace_width() const { return 2 * order * n_x; }

  void check() const {
    if (order < 1 || order > 2) throw std::invalid_argument("supported differentiability orders are 1 and 2");
    if (int(A.size()) != order + 1) throw std::invalid_argument("need order+1 dynamics coefficients");
    for (const auto& a : A)
      if (a.rows() != n_x || a.cols() != n_x) throw std::invalid_argument("A_i must be state-width square");
    if (b1.rows() != n_x || b2.rows() != n_x) throw std::invalid_argument("input maps must have state width");
    if (Bb.rows() != order * n_x || Bb.cols() != trace_width())
      throw std::invalid_argument("boundary-condition matrix must be N*n_x x 2*N*n_x");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Bb);
    if (lu.rank() < Bb.rows()) throw std::invalid_argument("boundary conditions are rank deficient");
    if (int(Cz.size()) != order + 1) throw std::invalid_argument("need order+1 output weight blocks");
    for (const auto& c : Cz)
      if (c.rows() != nz() || c.cols() != n_x)
        throw std::invalid_argument("output weights must be nz x n_x");
    if (Cy.rows() != ny() || (ny() > 0 && Cy.cols() != trace_width()))
      throw std::invalid_argument("observed-output rows must span the boundary trace");
    if (D12.cols() != nu() || D21.cols() != nw())
      throw std::invalid_argument("feedthrough widths inconsistent with inputs");
  }
};

// PIE system (T, A, B1, B2, C1, C2, D12, D21); the H2 semantics require no
// direct w -> z feedthrough, so none is stored.
struct PieSystem {
  Domain dom;
  PIOperator T, A;    // state -> state
  PIOperator B1, B2;  // R^{nw}/R^{nu} -> state
  PIOperator C1, C2;  // state -> R^{nz}/R^{ny}
  Eigen::MatrixXd D12, D21;
  int nw = 0, nu = 0, nz = 0, ny = 0;

  int state_m() const { return T.m1; }
  int state_n() const { return T.n1; }
};

// Result of eliminating boundary values through the boundary conditions:
// PI operators mapping the core state d^N x to each lower derivative, the
// boundary-trace kernel, and the conditioning of the elimination.
struct FundamentalIdentity {
  std::vector<PIOperator> deriv_map;  // index j: core state -> d^j x; [order] is identity
  PolyMatrix trace_kernel;            // 2N*n_x x n_x in theta: trace = int_a^b K(theta) core(theta) dtheta
  double condition_number = 0.0;
};

namespace detail {
inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}
}  // namespace detail

inline FundamentalIdentity fundamental_identity(int order, int n_x, const Eigen::MatrixXd& Bb,
                                                Domain dom, double cond_limit = 1e8) {
  const int N = order;
  const int tw = 2 * N * n_x;
  if (Bb.rows() != N * n_x || Bb.cols() != tw)
    throw std::invalid_argument("fundamental_identity: boundary matrix has wrong shape");

  // Cauchy's rule: d^j x(s) = sum_{k=j}^{N-1} (s-a)^{k-j}/(k-j)! c_k
  //                         + int_a^s (s-theta)^{N-1-j}/(N-1-j)! core(theta) dtheta,
  // with c_k = d^k x(a).
  PolyScalar s_m_a = PolyScalar::var_s(dom) + PolyScalar(-dom.a, dom);
  PolyScalar b_m_th = PolyScalar(dom.b, dom) - PolyScalar::var_theta(dom);
  PolyScalar s_m_th = PolyScalar::var_s(dom) - PolyScalar::var_theta(dom);
  auto poly_pow = [&](const PolyScalar& p, int e) {
    PolyScalar acc(1.0, dom);
    for (int i = 0; i < e; ++i) acc = acc * p;
    return acc;
  };

  // Trace = F c + int_a^b G(theta) core(theta) dtheta.
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(tw, N * n_x);
  PolyMatrix G(tw, n_x, dom);
  for (int j = 0; j < N; ++j) {
    // at a: d^j x(a) = c_j
    F.block(j * n_x, j * n_x, n_x, n_x) = Eigen::MatrixXd::Identity(n_x, n_x);
    // at b
    for (int k = j; k < N; ++k) {
      double coef = std::pow(dom.b - dom.a, k - j) / detail::factorial(k - j);
      F.block((N + j) * n_x, k * n_x, n_x, n_x) = coef * Eigen::MatrixXd::Identity(n_x, n_x);
    }
    PolyScalar ker = poly_pow(b_m_th, N - 1 - j).scaled(1.0 / detail::factorial(N - 1 - j));
    for (int i = 0; i < n_x; ++i) G.at((N + j) * n_x + i, i) = ker;
  }

  Eigen::MatrixXd M = Bb * F;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  double smin = svd.singularValues().minCoeff();
  double smax = svd.singularValues().maxCoeff();
  double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(cond < cond_limit))
    throw std::runtime_error("ill-posed boundary conditions (elimination condition number " +
                             std::to_string(cond) + ")");
  Eigen::MatrixXd Minv = M.inverse();

  // c = int_a^b Hc(theta) core(theta) dtheta with Hc = -M^{-1} Bb G.
  PolyMatrix Hc = PolyMatrix::from_constant(-Minv * Bb, dom) * G;

  FundamentalIdentity fi;
  for (int j = 0; j < N; ++j) {
    // S_j(s): c -> d^j x(s) homogeneous-solution part
    PolyMatrix Sj(n_x, N * n_x, dom);
    for (int k = j; k < N; ++k) {
      PolyScalar coef = poly_pow(s_m_a, k - j).scaled(1.0 / detail::factorial(k - j));
      for (int i = 0; i < n_x; ++i) Sj.at(i, k * n_x + i) = coef;
    }
    PolyMatrix K = Sj * Hc;  // n_x x n_x, in (s,theta)
    PIOperator Tj = PIOperator::zero(0, n_x, 0, n_x, dom);
    PolyScalar cauchy = poly_pow(s_m_th, N - 1 - j).scaled(1.0 / detail::factorial(N - 1 - j));
    Tj.R1 = K;
    for (int i = 0; i < n_x; ++i) Tj.R1.at(i, i) = Tj.R1.at(i, i) + cauchy;
    Tj.R2 = K;
    fi.deriv_map.push_back(Tj);
  }
  fi.deriv_map.push_back(PIOperator::identity(0, n_x, dom));
  fi.trace_kernel = PolyMatrix::from_constant(F, dom) * Hc + G;
  fi.condition_number = cond;
  return fi;
}

inline PieSystem convert_to_pie(const GpdeSystem& g) {
  g.check();
  const Domain dom = g.dom;
  FundamentalIdentity fi = fundamental_identity(g.order, g.n_x, g.Bb, dom);

  PieSystem pie;
  pie.dom = dom;
  pie.nw = g.nw();
  pie.nu = g.nu();
  pie.nz = g.nz();
  pie.ny = g.ny();

  pie.T = fi.deriv_map[0];

  PIOperator A_op = PIOperator::zero(0, g.n_x, 0, g.n_x, dom);
  for (int i = 0; i <= g.order; ++i) {
    if (g.A[i].is_zero()) continue;
    A_op = pi_add(A_op, pi_compose(PIOperator::multiplier(g.A[i], dom), fi.deriv_map[i]));
  }
  pie.A = A_op;

  pie.B1 = PIOperator::column(g.b1, dom);
  pie.B2 = PIOperator::column(g.b2, dom);

  PIOperator C1 = PIOperator::zero(0, g.n_x, g.nz(), 0, dom);
  for (int i = 0; i <= g.order; ++i) {
    if (g.Cz[i].is_zero()) continue;
    C1 = pi_add(C1, pi_compose(PIOperator::row(g.Cz[i], dom), fi.deriv_map[i]));
  }
  pie.C1 = C1;

  // Boundary-evaluation outputs become full-integral kernels through the
  // eliminated trace.
  PolyMatrix cy_kernel = (PolyMatrix::from_constant(g.Cy, dom) * fi.trace_kernel).swapped();
  pie.C2 = PIOperator::row(cy_kernel, dom);

  pie.D12 = g.D12;
  pie.D21 = g.D21;
  return pie;
}

// Report-only audit of a PIE system.
struct ValidationReport {
  bool ok = true;
  std::vector<std::string> issues;
  void flag(const std::string& msg) {
    ok = false;
    issues.push_back(msg);
  }
};

inline ValidationReport validate_pie(const PieSystem& p) {
  ValidationReport rep;
  auto same_state_in = [&](const PIOperator& op, const std::string& name) {
    if (op.m1 != p.state_m() || op.n1 != p.state_n())
      rep.flag(name + ": input dims do not match the state space");
    if (!(op.dom == p.dom)) rep.flag(name + ": domain mismatch");
  };
  same_state_in(p.T, "T");
  same_state_in(p.A, "A");
  same_state_in(p.C1, "C1");
  same_state_in(p.C2, "C2");
  if (p.T.m2 != p.state_m() || p.T.n2 != p.state_n()) rep.flag("T: not an endomorphism of the state space");
  if (p.A.m2 != p.state_m() || p.A.n2 != p.state_n()) rep.flag("A: not an endomorphism of the state space");
  if (p.B1.m1 != p.nw || p.B1.n1 != 0) rep.flag("B1: input width != nw");
  if (p.B2.m1 != p.nu || p.B2.n1 != 0) rep.flag("B2: input width != nu");
  if (p.B1.m2 != p.state_m() || p.B1.n2 != p.state_n()) rep.flag("B1: output dims do not match the state space");
  if (p.B2.m2 != p.state_m() || p.B2.n2 != p.state_n()) rep.flag("B2: output dims do not match the state space");
  if (p.C1.m2 != p.nz || p.C1.n2 != 0) rep.flag("C1: output width != nz");
  if (p.C2.m2 != p.ny || p.C2.n2 != 0) rep.flag("C2: output width != ny");
  if (p.D12.rows() != p.nz || p.D12.cols() != p.nu) rep.flag("D12: shape != nz x nu");
  if (p.D21.rows() != p.ny || p.D21.cols() != p.nw) rep.flag("D21: shape != ny x nw");
  // H2 well-posedness: any w -> z feedthrough would make the H2 norm
  // unbounded; the type cannot carry one, so only cross-coupling is audited.
  if (p.nz > 0 && p.nw > 0 && p.D21.size() > 0 && p.D12.size() > 0) {
    // nothing further: the absence of D11 is structural
  }
  return rep;
}

// --- JSON -------------------------------------------------------------------

inline nlohmann::json to_json(const PieSystem& p) {
  nlohmann::json d12 = nlohmann::json::array(), d21 = nlohmann::json::array();
  for (int i = 0; i < p.D12.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < p.D12.cols(); ++j) row.push_back(p.D12(i, j));
    d12.push_back(row);
  }
  for (int i = 0; i < p.D21.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < p.D21.cols(); ++j) row.push_back(p.D21(i, j));
    d21.push_back(row);
  }
  return {{"schema", "pie-1"},
          {"domain", {p.dom.a, p.dom.b}},
          {"widths", {{"nw", p.nw}, {"nu", p.nu}, {"nz", p.nz}, {"ny", p.ny}}},
          {"T", to_json(p.T)},   {"A", to_json(p.A)},
          {"B1", to_json(p.B1)}, {"B2", to_json(p.B2)},
          {"C1", to_json(p.C1)}, {"C2", to_json(p.C2)},
          {"D12", d12},          {"D21", d21}};
}

inline PieSystem pie_system_from_json(const nlohmann::json& j) {
  PieSystem p;
  p.dom = Domain{j.at("domain")[0].get<double>(), j.at("domain")[1].get<double>()};
  const auto& w = j.at("widths");
  p.nw = w.at("nw").get<int>();
  p.nu = w.at("nu").get<int>();
  p.nz = w.at("nz").get<int>();
  p.ny = w.at("ny").get<int>();
  p.T = pi_operator_from_json(j.at("T"));
  p.A = pi_operator_from_json(j.at("A"));
  p.B1 = pi_operator_from_json(j.at("B1"));
  p.B2 = pi_operator_from_json(j.at("B2"));
  p.C1 = pi_operator_from_json(j.at("C1"));
  p.C2 = pi_operator_from_json(j.at("C2"));
  auto mat = [](const nlohmann::json& rows, int nr, int nc) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nr, nc);
    for (int i = 0; i < int(rows.size()); ++i)
      for (int c = 0; c < int(rows[i].size()); ++c) m(i, c) = rows[i][c].get<double>();
    return m;
  };
  p.D12 = mat(j.at("D12"), p.nz, p.nu);
  p.D21 = mat(j.at("D21"), p.ny, p.nw);
  return p;
}

}  // namespace pie

#endif  // PIE_GPDE_HPP_
