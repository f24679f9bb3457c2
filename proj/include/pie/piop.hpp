#ifndef PIE_PIOP_HPP_
#define PIE_PIOP_HPP_

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pie/poly.hpp"

namespace pie {

// Element of R^m x L2^n[a,b] with a polynomial function part.
struct RL2Element {
  Eigen::VectorXd finite;  // length m
  PolyMatrix fn;           // n x 1, polynomial in s
  Domain dom;

  int m() const { return int(finite.size()); }
  int n() const { return fn.rows(); }
};

inline double rl2_inner(const RL2Element& x, const RL2Element& y) {
  if (x.m() != y.m() || x.n() != y.n()) throw std::invalid_argument("rl2_inner dimension mismatch");
  check_same_domain(x.dom, y.dom);
  double acc = x.finite.dot(y.finite);
  PolyMatrix prod = x.fn.transpose() * y.fn;  // 1x1
  if (prod.rows() == 1) {
    PolyScalar integral = prod.at(0, 0).integrate(Var::S, Bound::A, Bound::B);
    acc += integral.eval(0.0, 0.0);
  }
  return acc;
}

// 4-PI operator: matrix part P plus polynomial kernels Q1(s), Q2(s), R0(s),
// R1(s,theta), R2(s,theta) on a shared domain.  Maps RL2^{m1,n1} to
// RL2^{m2,n2}.  Zero-width channels are carried as 0-sized blocks.
struct PIOperator {
  int m1 = 0, n1 = 0;  // input widths (finite, function)
  int m2 = 0, n2 = 0;  // output widths
  Domain dom;
  Eigen::MatrixXd P;   // m2 x m1
  PolyMatrix Q1;       // m2 x n1, in s
  PolyMatrix Q2;       // n2 x m1, in s
  PolyMatrix R0;       // n2 x n1, in s
  PolyMatrix R1;       // n2 x n1, in (s,theta), acts on theta < s
  PolyMatrix R2;       // n2 x n1, in (s,theta), acts on theta > s

  PIOperator() : P(0, 0) {}

  static PIOperator zero(int m1, int n1, int m2, int n2, Domain dom) {
    PIOperator op;
    op.m1 = m1; op.n1 = n1; op.m2 = m2; op.n2 = n2; op.dom = dom;
    op.P = Eigen::MatrixXd::Zero(m2, m1);
    op.Q1 = PolyMatrix(m2, n1, dom);
    op.Q2 = PolyMatrix(n2, m1, dom);
    op.R0 = PolyMatrix(n2, n1, dom);
    op.R1 = PolyMatrix(n2, n1, dom);
    op.R2 = PolyMatrix(n2, n1, dom);
    return op;
  }

  static PIOperator identity(int m, int n, Domain dom) {
    PIOperator op = zero(m, n, m, n, dom);
    op.P = Eigen::MatrixXd::Identity(m, m);
    op.R0 = PolyMatrix::identity(n, dom);
    return op;
  }

  static PIOperator from_matrix(const Eigen::MatrixXd& M, Domain dom) {
    PIOperator op = zero(int(M.cols()), 0, int(M.rows()), 0, dom);
    op.P = M;
    return op;
  }

  // Pure multiplier on the function channel.
  static PIOperator multiplier(const PolyMatrix& R0, Domain dom) {
    PIOperator op = zero(0, R0.cols(), 0, R0.rows(), dom);
    op.R0 = R0;
    return op;
  }

  // Maps a finite vector to a function column: x -> Q2(s) x.
  static PIOperator column(const PolyMatrix& Q2, Domain dom) {
    PIOperator op = zero(Q2.cols(), 0, 0, Q2.rows(), dom);
    op.Q2 = Q2;
    return op;
  }

  // Maps a function to a finite vector: f -> \int_a^b Q1(s) f(s) ds.
  static PIOperator row(const PolyMatrix& Q1, Domain dom) {
    PIOperator op = zero(0, Q1.cols(), Q1.rows(), 0, dom);
    op.Q1 = Q1;
    return op;
  }

  void check_shapes() const {
    if (P.rows() != m2 || P.cols() != m1 || Q1.rows() != m2 || Q1.cols() != n1 ||
        Q2.rows() != n2 || Q2.cols() != m1 || R0.rows() != n2 || R0.cols() != n1 ||
        R1.rows() != n2 || R1.cols() != n1 || R2.rows() != n2 || R2.cols() != n1)
      throw std::logic_error("PIOperator parameter shapes inconsistent with dims");
  }

  bool same_dims(const PIOperator& o) const {
    return m1 == o.m1 && n1 == o.n1 && m2 == o.m2 && n2 == o.n2 && dom == o.dom;
  }

  bool is_zero() const {
    return P.size() == 0 ? (Q1.is_zero() && Q2.is_zero() && R0.is_zero() && R1.is_zero() && R2.is_zero())
                         : (P.norm() == 0.0 && Q1.is_zero() && Q2.is_zero() && R0.is_zero() &&
                            R1.is_zero() && R2.is_zero());
  }

  bool approx_equal(const PIOperator& o, double tol) const {
    if (!same_dims(o)) return false;
    if (P.size() > 0 && (P - o.P).cwiseAbs().maxCoeff() > tol) return false;
    return Q1.approx_equal(o.Q1, tol) && Q2.approx_equal(o.Q2, tol) && R0.approx_equal(o.R0, tol) &&
           R1.approx_equal(o.R1, tol) && R2.approx_equal(o.R2, tol);
  }

  double max_abs_coeff() const {
    double m = 0.0;
    if (P.size() > 0) m = P.cwiseAbs().maxCoeff();
    m = std::max({m, Q1.max_abs_coeff(), Q2.max_abs_coeff(), R0.max_abs_coeff(),
                  R1.max_abs_coeff(), R2.max_abs_coeff()});
    return m;
  }
};

inline PIOperator pi_add(const PIOperator& a, const PIOperator& b) {
  if (!a.same_dims(b)) throw std::invalid_argument("pi_add dimension mismatch");
  PIOperator r = a;
  if (a.P.size() > 0) r.P = a.P + b.P;
  r.Q1 = a.Q1 + b.Q1;
  r.Q2 = a.Q2 + b.Q2;
  r.R0 = a.R0 + b.R0;
  r.R1 = a.R1 + b.R1;
  r.R2 = a.R2 + b.R2;
  return r;
}

inline PIOperator pi_scale(const PIOperator& a, double c) {
  PIOperator r = a;
  if (a.P.size() > 0) r.P = c * a.P;
  r.Q1 = a.Q1.scaled(c);
  r.Q2 = a.Q2.scaled(c);
  r.R0 = a.R0.scaled(c);
  r.R1 = a.R1.scaled(c);
  r.R2 = a.R2.scaled(c);
  return r;
}

inline RL2Element pi_apply(const PIOperator& op, const RL2Element& v) {
  if (v.m() != op.m1 || v.n() != op.n1) throw std::invalid_argument("pi_apply dimension mismatch");
  check_same_domain(op.dom, v.dom);
  RL2Element out;
  out.dom = op.dom;

  PolyMatrix f = v.fn;  // n1 x 1 in s
  PolyMatrix f_theta = f.swapped();  // same entries read as functions of theta

  // finite part: P x + \int_a^b Q1(s) f(s) ds
  Eigen::VectorXd fin = op.P * v.finite;
  if (op.n1 > 0 && op.m2 > 0) {
    PolyMatrix integrand = op.Q1 * f;  // m2 x 1 in s
    PolyMatrix integral = integrand.integrate(Var::S, Bound::A, Bound::B);
    fin += integral.eval(0.0, 0.0).col(0);
  }
  out.finite = fin;

  // function part: Q2(s) x + R0 f + \int_a^s R1 f + \int_s^b R2 f
  PolyMatrix fn(op.n2, 1, op.dom);
  if (op.m1 > 0) fn = fn + op.Q2 * PolyMatrix::from_constant(v.finite, op.dom);
  if (op.n1 > 0) {
    fn = fn + op.R0 * f;
    fn = fn + (op.R1 * f_theta).integrate(Var::Theta, Bound::A, Bound::S);
    fn = fn + (op.R2 * f_theta).integrate(Var::Theta, Bound::S, Bound::B);
  }
  out.fn = fn;
  return out;
}

inline PIOperator pi_adjoint(const PIOperator& a) {
  PIOperator r = PIOperator::zero(a.m2, a.n2, a.m1, a.n1, a.dom);
  r.P = a.P.transpose();
  r.Q1 = a.Q2.transpose();
  r.Q2 = a.Q1.transpose();
  r.R0 = a.R0.transpose();
  r.R1 = a.R2.swapped().transpose();
  r.R2 = a.R1.swapped().transpose();
  return r;
}

// Composition c = a o b with parameters obtained by splitting the double
// integrals at s and theta.  Certified against the sequential-application
// oracle in the test suite.
inline PIOperator pi_compose(const PIOperator& a, const PIOperator& b) {
  if (a.m1 != b.m2 || a.n1 != b.n2) throw std::invalid_argument("pi_compose dimension mismatch");
  check_same_domain(a.dom, b.dom);
  const Domain dom = a.dom;
  PIOperator c = PIOperator::zero(b.m1, b.n1, a.m2, a.n2, dom);

  const bool inner_fin = a.m1 > 0;
  const bool inner_fn = a.n1 > 0;

  // P = Pa Pb + \int_a^b Q1a(s) Q2b(s) ds
  if (c.m2 > 0 && c.m1 > 0) {
    c.P = inner_fin ? Eigen::MatrixXd(a.P * b.P) : Eigen::MatrixXd::Zero(c.m2, c.m1);
    if (inner_fn) {
      PolyMatrix integrand = a.Q1 * b.Q2;
      c.P += integrand.integrate(Var::S, Bound::A, Bound::B).eval(0.0, 0.0);
    }
  }

  // Q1c(s) = Pa? no finite path; Q1 gets: Q1a R0b + cross-Volterra pieces plus
  // Pa Q1b through the finite inner channel.
  if (c.m2 > 0 && c.n1 > 0) {
    if (inner_fin) c.Q1 = PolyMatrix::from_constant(a.P, dom) * b.Q1;
    if (inner_fn) {
      c.Q1 = c.Q1 + a.Q1 * b.R0;
      // \int_s^b Q1a(eta) R1b(eta,s) deta + \int_a^s Q1a(eta) R2b(eta,s) deta,
      // computed with the result variable temporarily named theta.
      PolyMatrix q1_eta = a.Q1.swapped();  // Q1a as a function of theta (-> eta)
      PolyMatrix t1 = conv_integral(q1_eta, b.R1, Bound::Theta, Bound::B);
      PolyMatrix t2 = conv_integral(q1_eta, b.R2, Bound::A, Bound::Theta);
      c.Q1 = c.Q1 + (t1 + t2).swapped();
    }
  }

  // Q2c(s) = Q2a Pb + R0a Q2b + \int_a^s R1a(s,th) Q2b(th) dth + \int_s^b R2a(s,th) Q2b(th) dth
  if (c.n2 > 0 && c.m1 > 0) {
    if (inner_fin) c.Q2 = a.Q2 * PolyMatrix::from_constant(b.P, dom);
    if (inner_fn) {
      c.Q2 = c.Q2 + a.R0 * b.Q2;
      PolyMatrix q2_theta = b.Q2.swapped();
      c.Q2 = c.Q2 + (a.R1 * q2_theta).integrate(Var::Theta, Bound::A, Bound::S);
      c.Q2 = c.Q2 + (a.R2 * q2_theta).integrate(Var::Theta, Bound::S, Bound::B);
    }
  }

  if (c.n2 > 0 && c.n1 > 0 && (inner_fn || inner_fin)) {
    if (inner_fn) c.R0 = a.R0 * b.R0;

    PolyMatrix cross(c.n2, c.n1, dom);  // Q2a(s) Q1b(theta), via the finite inner channel
    if (inner_fin) cross = a.Q2 * b.Q1.swapped();

    if (inner_fn) {
      PolyMatrix r0b_theta = b.R0.swapped();
      // R1c = Q2a Q1b(th) + R0a R1b + R1a R0b(th)
      //     + \int_th^s R1a R1b + \int_a^th R1a R2b + \int_s^b R2a R1b
      c.R1 = cross + a.R0 * b.R1 + a.R1 * r0b_theta +
             conv_integral(a.R1, b.R1, Bound::Theta, Bound::S) +
             conv_integral(a.R1, b.R2, Bound::A, Bound::Theta) +
             conv_integral(a.R2, b.R1, Bound::S, Bound::B);
      // R2c = Q2a Q1b(th) + R0a R2b + R2a R0b(th)
      //     + \int_a^s R1a R2b + \int_th^b R2a R1b + \int_s^th R2a R2b
      c.R2 = cross + a.R0 * b.R2 + a.R2 * r0b_theta +
             conv_integral(a.R1, b.R2, Bound::A, Bound::S) +
             conv_integral(a.R2, b.R1, Bound::Theta, Bound::B) +
             conv_integral(a.R2, b.R2, Bound::S, Bound::Theta);
    } else {
      c.R1 = cross;
      c.R2 = cross;
    }
  }
  return c;
}

// Horizontal concatenation [a b]: inputs stacked, outputs shared.
inline PIOperator pi_horz(const PIOperator& a, const PIOperator& b) {
  if (a.m2 != b.m2 || a.n2 != b.n2) throw std::invalid_argument("pi_horz output dims mismatch");
  check_same_domain(a.dom, b.dom);
  PIOperator r = PIOperator::zero(a.m1 + b.m1, a.n1 + b.n1, a.m2, a.n2, a.dom);
  r.P.leftCols(a.m1) = a.P;
  r.P.rightCols(b.m1) = b.P;
  r.Q1 = PolyMatrix::hcat(a.Q1, b.Q1);
  r.Q2 = PolyMatrix::hcat(a.Q2, b.Q2);
  r.R0 = PolyMatrix::hcat(a.R0, b.R0);
  r.R1 = PolyMatrix::hcat(a.R1, b.R1);
  r.R2 = PolyMatrix::hcat(a.R2, b.R2);
  return r;
}

// Vertical concatenation [a; b]: outputs stacked, inputs shared.
inline PIOperator pi_vert(const PIOperator& a, const PIOperator& b) {
  if (a.m1 != b.m1 || a.n1 != b.n1) throw std::invalid_argument("pi_vert input dims mismatch");
  check_same_domain(a.dom, b.dom);
  PIOperator r = PIOperator::zero(a.m1, a.n1, a.m2 + b.m2, a.n2 + b.n2, a.dom);
  r.P.topRows(a.m2) = a.P;
  r.P.bottomRows(b.m2) = b.P;
  r.Q1 = PolyMatrix::vcat(a.Q1, b.Q1);
  r.Q2 = PolyMatrix::vcat(a.Q2, b.Q2);
  r.R0 = PolyMatrix::vcat(a.R0, b.R0);
  r.R1 = PolyMatrix::vcat(a.R1, b.R1);
  r.R2 = PolyMatrix::vcat(a.R2, b.R2);
  return r;
}

inline PIOperator pi_blockdiag(const PIOperator& a, const PIOperator& b) {
  PIOperator top = pi_horz(a, PIOperator::zero(b.m1, b.n1, a.m2, a.n2, a.dom));
  PIOperator bot = pi_horz(PIOperator::zero(a.m1, a.n1, b.m2, b.n2, a.dom), b);
  return pi_vert(top, bot);
}

inline PIOperator pi_blockdiag(const std::vector<PIOperator>& ops) {
  if (ops.empty()) throw std::invalid_argument("pi_blockdiag on empty list");
  PIOperator r = ops[0];
  for (std::size_t i = 1; i < ops.size(); ++i) r = pi_blockdiag(r, ops[i]);
  return r;
}

// Trace of a finite-to-finite operator (pure matrix).
inline double pi_finite_trace(const PIOperator& a) {
  if (a.n1 != 0 || a.n2 != 0) throw std::invalid_argument("pi_finite_trace requires zero function dims");
  if (a.m1 != a.m2) throw std::invalid_argument("pi_finite_trace requires a square matrix part");
  return a.P.trace();
}

// --- JSON serialization -----------------------------------------------------

inline nlohmann::json to_json(const PIOperator& op) {
  nlohmann::json p = nlohmann::json::array();
  for (int i = 0; i < op.P.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < op.P.cols(); ++j) row.push_back(op.P(i, j));
    p.push_back(row);
  }
  return {{"dims_in", {op.m1, op.n1}},
          {"dims_out", {op.m2, op.n2}},
          {"domain", {op.dom.a, op.dom.b}},
          {"P", p},
          {"Q1", to_json(op.Q1)},
          {"Q2", to_json(op.Q2)},
          {"R0", to_json(op.R0)},
          {"R1", to_json(op.R1)},
          {"R2", to_json(op.R2)}};
}

inline PIOperator pi_operator_from_json(const nlohmann::json& j) {
  Domain dom{j.at("domain")[0].get<double>(), j.at("domain")[1].get<double>()};
  PIOperator op = PIOperator::zero(j.at("dims_in")[0], j.at("dims_in")[1],
                                   j.at("dims_out")[0], j.at("dims_out")[1], dom);
  const auto& p = j.at("P");
  for (int i = 0; i < op.P.rows(); ++i)
    for (int c = 0; c < op.P.cols(); ++c) op.P(i, c) = p[i][c].get<double>();
  op.Q1 = poly_matrix_from_json(j.at("Q1"));
  op.Q2 = poly_matrix_from_json(j.at("Q2"));
  op.R0 = poly_matrix_from_json(j.at("R0"));
  op.R1 = poly_matrix_from_json(j.at("R1"));
  op.R2 = poly_matrix_from_json(j.at("R2"));
  op.check_shapes();
  return op;
}

}  // namespace pie

#endif  // PIE_PIOP_HPP_
