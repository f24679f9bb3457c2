#ifndef PIE_CHEB_HPP_
#define PIE_CHEB_HPP_

#include <cmath>

#include <Eigen/Dense>

#include "pie/piop.hpp"

namespace pie {

// Chebyshev-Gauss-Lobatto collocation grid with Clenshaw-Curtis weights and a
// spectrally accurate cumulative integration matrix (cum f)_i ~ int_a^{s_i} f.
struct ChebGrid {
  Domain dom;
  int N = 0;
  Eigen::VectorXd s;    // ascending nodes
  Eigen::VectorXd w;    // quadrature weights
  Eigen::MatrixXd cum;  // N x N cumulative integration matrix
};

inline ChebGrid make_cheb_grid(int N, Domain dom) {
  if (N < 2) throw std::invalid_argument("make_cheb_grid: need at least two nodes");
  ChebGrid g;
  g.dom = dom;
  g.N = N;
  const int n = N - 1;
  const double half = 0.5 * dom.width();

  // ascending nodes: x_i = -cos(i pi / n)
  Eigen::VectorXd x(N);
  for (int i = 0; i < N; ++i) x(i) = -std::cos(M_PI * i / n);
  g.s = Eigen::VectorXd::Constant(N, dom.a + half) + half * x;

  // Clenshaw-Curtis weights on [-1,1], then scaled
  g.w = Eigen::VectorXd::Zero(N);
  for (int j = 0; j <= n; ++j) {
    double c = (j == 0 || j == n) ? 1.0 : 2.0;
    double acc = 1.0;
    for (int k = 1; k <= n / 2; ++k) {
      double b = (2 * k == n) ? 1.0 : 2.0;
      acc -= b / (4.0 * k * k - 1.0) * std::cos(2.0 * M_PI * k * j / n);
    }
    g.w(j) = c * acc / n;
  }
  g.w *= half;

  // values -> Chebyshev coefficients (clamped cosine transform on T_k(x_i))
  Eigen::MatrixXd V(N, N);
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < N; ++k) V(i, k) = std::cos(k * std::acos(x(i)));
  Eigen::MatrixXd to_coeff = V.fullPivLu().inverse();

  // antiderivative in coefficient space: int T_0 = T_1, int T_1 = T_2 / 4,
  // int T_k = T_{k+1}/(2(k+1)) - T_{k-1}/(2(k-1)) for k >= 2
  Eigen::MatrixXd anti = Eigen::MatrixXd::Zero(N + 1, N);
  anti(1, 0) = 1.0;
  if (N > 1) anti(2, 1) = 0.25;
  for (int k = 2; k < N; ++k) {
    anti(k + 1, k) = 0.5 / (k + 1);
    anti(k - 1, k) -= 0.5 / (k - 1);
  }
  Eigen::MatrixXd Ve(N, N + 1);
  for (int i = 0; i < N; ++i)
    for (int k = 0; k <= N; ++k) Ve(i, k) = std::cos(k * std::acos(x(i)));
  Eigen::MatrixXd eval_anti = Ve * anti * to_coeff;  // values of an antiderivative at nodes
  g.cum = half * (eval_anti - Eigen::VectorXd::Ones(N) * eval_anti.row(0));
  return g;
}

// Matrix form of a PI operator on the grid.  Vector layout: finite part, then
// N samples per function channel.
inline Eigen::MatrixXd discretize_op(const PIOperator& op, const ChebGrid& g) {
  check_same_domain(op.dom, g.dom);
  const int N = g.N;
  const int rows = op.m2 + N * op.n2, cols = op.m1 + N * op.n1;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(rows, cols);
  M.topLeftCorner(op.m2, op.m1) = op.P;
  for (int i = 0; i < op.m2; ++i)
    for (int j = 0; j < op.n1; ++j)
      for (int k = 0; k < N; ++k)
        M(i, op.m1 + j * N + k) += g.w(k) * op.Q1.at(i, j).eval(g.s(k), 0.0);
  for (int i = 0; i < op.n2; ++i)
    for (int p = 0; p < N; ++p) {
      int r = op.m2 + i * N + p;
      for (int j = 0; j < op.m1; ++j) M(r, j) += op.Q2.at(i, j).eval(g.s(p), 0.0);
      for (int j = 0; j < op.n1; ++j) {
        int c0 = op.m1 + j * N;
        M(r, c0 + p) += op.R0.at(i, j).eval(g.s(p), 0.0);
        for (int k = 0; k < N; ++k) {
          M(r, c0 + k) += g.cum(p, k) * op.R1.at(i, j).eval(g.s(p), g.s(k));
          M(r, c0 + k) += (g.w(k) - g.cum(p, k)) * op.R2.at(i, j).eval(g.s(p), g.s(k));
        }
      }
    }
  return M;
}

// Samples of an RL2 element on the grid in the discretize_op layout.
inline Eigen::VectorXd sample_element(const RL2Element& v, const ChebGrid& g) {
  Eigen::VectorXd out(v.m() + g.N * v.n());
  out.head(v.m()) = v.finite;
  for (int j = 0; j < v.n(); ++j)
    for (int k = 0; k < g.N; ++k) out(v.m() + j * g.N + k) = v.fn.at(j, 0).eval(g.s(k), 0.0);
  return out;
}

}  // namespace pie

#endif  // PIE_CHEB_HPP_
