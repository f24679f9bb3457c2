#ifndef PIE_LPI_HPP_
#define PIE_LPI_HPP_

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "pie/piop.hpp"
#include "pie/sdp.hpp"

namespace pie {

// PI-operator expression affine in scalar SDP decision variables:
//   constant + sum_k var_k * term_k.
struct AffineOp {
  PIOperator constant;
  std::map<int, PIOperator> terms;

  bool is_constant() const { return terms.empty(); }

  const PIOperator& shape() const { return constant; }
};

inline AffineOp affine_const(const PIOperator& op) {
  AffineOp a;
  a.constant = op;
  return a;
}

inline AffineOp affine_add(const AffineOp& a, const AffineOp& b) {
  AffineOp r;
  r.constant = pi_add(a.constant, b.constant);
  r.terms = a.terms;
  for (auto& [k, op] : b.terms) {
    auto it = r.terms.find(k);
    if (it == r.terms.end()) r.terms.emplace(k, op);
    else it->second = pi_add(it->second, op);
  }
  return r;
}

inline AffineOp affine_scale(const AffineOp& a, double c) {
  AffineOp r;
  r.constant = pi_scale(a.constant, c);
  for (auto& [k, op] : a.terms) r.terms.emplace(k, pi_scale(op, c));
  return r;
}

inline AffineOp affine_adjoint(const AffineOp& a) {
  AffineOp r;
  r.constant = pi_adjoint(a.constant);
  for (auto& [k, op] : a.terms) r.terms.emplace(k, pi_adjoint(op));
  return r;
}

inline AffineOp affine_compose(const AffineOp& a, const AffineOp& b) {
  if (!a.is_constant() && !b.is_constant())
    throw std::invalid_argument(
        "bilinear product of decision-variable operator expressions is not an LPI");
  AffineOp r;
  r.constant = pi_compose(a.constant, b.constant);
  for (auto& [k, op] : a.terms) r.terms.emplace(k, pi_compose(op, b.constant));
  for (auto& [k, op] : b.terms) r.terms.emplace(k, pi_compose(a.constant, op));
  return r;
}

inline AffineOp affine_compose(const PIOperator& a, const AffineOp& b) {
  return affine_compose(affine_const(a), b);
}
inline AffineOp affine_compose(const AffineOp& a, const PIOperator& b) {
  return affine_compose(a, affine_const(b));
}

namespace detail {
inline PIOperator zero_like(const PIOperator& op) {
  return PIOperator::zero(op.m1, op.n1, op.m2, op.n2, op.dom);
}

template <typename F>
AffineOp affine_zip(const AffineOp& a, const AffineOp& b, F f) {
  AffineOp r;
  r.constant = f(a.constant, b.constant);
  std::set<int> keys;
  for (auto& [k, op] : a.terms) keys.insert(k);
  for (auto& [k, op] : b.terms) keys.insert(k);
  for (int k : keys) {
    auto ia = a.terms.find(k);
    auto ib = b.terms.find(k);
    const PIOperator& ta = ia != a.terms.end() ? ia->second : zero_like(a.constant);
    const PIOperator& tb = ib != b.terms.end() ? ib->second : zero_like(b.constant);
    r.terms.emplace(k, f(ta, tb));
  }
  return r;
}
}  // namespace detail

inline AffineOp affine_horz(const AffineOp& a, const AffineOp& b) {
  return detail::affine_zip(a, b, [](const PIOperator& x, const PIOperator& y) { return pi_horz(x, y); });
}
inline AffineOp affine_vert(const AffineOp& a, const AffineOp& b) {
  return detail::affine_zip(a, b, [](const PIOperator& x, const PIOperator& y) { return pi_vert(x, y); });
}

// --- Gram basis of positive PI operators ------------------------------------
//
// Z_d maps (x, y) in R^m + L2^n to a stack of pure functions: the finite part
// embedded as constant functions, the monomial multiplier block Z_d(s) (x) I_n,
// and lower/upper Volterra blocks with kernels Z_d(s) (x) Z_d(theta) (x) I_n.
// For any PSD Q, <v, Z_d* Q Z_d v> = int (Z_d v)' Q (Z_d v) ds >= 0.
struct GramBasis {
  int m = 0, n = 0, d = 0, dv = 0;  // d: multiplier degree, dv: Volterra degree
  Domain dom;
  std::vector<PIOperator> rows;  // each maps RL2^{m,n} -> L2^1

  int q() const { return int(rows.size()); }

  // Z_i* Z_j, symmetrized for i != j so the expansion stays self-adjoint.
  PIOperator pair_op(int i, int j) const {
    PIOperator op = pi_compose(pi_adjoint(rows[i]), rows[j]);
    if (i != j) op = pi_add(op, pi_compose(pi_adjoint(rows[j]), rows[i]));
    return op;
  }
};

// d_mult and d_volt may differ: the multiplier rows are cheap (linear in the
// degree) while the Volterra rows are quadratic, and expressions with
// high-degree Q kernels only need the multiplier group extended.
inline GramBasis make_gram_basis(int m, int n, int d_mult, int d_volt, Domain dom) {
  GramBasis g;
  g.m = m;
  g.n = n;
  g.d = d_mult;
  g.dv = d_volt;
  g.dom = dom;
  for (int i = 0; i < m; ++i) {
    PIOperator r = PIOperator::zero(m, n, 0, 1, dom);
    r.Q2.at(0, i) = PolyScalar(1.0, dom);
    g.rows.push_back(r);
  }
  for (int j = 0; j < n; ++j)
    for (int k = 0; k <= d_mult; ++k) {
      PIOperator r = PIOperator::zero(m, n, 0, 1, dom);
      r.R0.at(0, j) = PolyScalar::monomial(1.0, k, 0, dom);
      g.rows.push_back(r);
    }
  for (int which = 1; which <= 2; ++which)
    for (int j = 0; j < n; ++j)
      for (int ks = 0; ks <= d_volt; ++ks)
        for (int kt = 0; kt <= d_volt; ++kt) {
          PIOperator r = PIOperator::zero(m, n, 0, 1, dom);
          PolyScalar ker = PolyScalar::monomial(1.0, ks, kt, dom);
          if (which == 1) r.R1.at(0, j) = ker;
          else r.R2.at(0, j) = ker;
          g.rows.push_back(r);
        }
  return g;
}

inline GramBasis make_gram_basis(int m, int n, int d, Domain dom) {
  return make_gram_basis(m, n, d, d, dom);
}

// --- LPI problem builder ----------------------------------------------------

class LpiProblem {
 public:
  explicit LpiProblem(Domain dom) : dom_(dom) {}

  SdpProblem& sdp() { return sdp_; }
  const SdpProblem& sdp() const { return sdp_; }

  // eps*I + Z_d* Q Z_d with a fresh PSD block Q.
  AffineOp pos_op_var(const std::string& name, int m, int n, int d, double eps = 1e-4) {
    GramBasis g = make_gram_basis(m, n, d, dom_);
    int blk = sdp_.add_block(name, g.q());
    AffineOp e = affine_const(pi_scale(PIOperator::identity(m, n, dom_), eps));
    for (int i = 0; i < g.q(); ++i)
      for (int j = i; j < g.q(); ++j) e.terms.emplace(sdp_.entry_var(blk, i, j), g.pair_op(i, j));
    return e;
  }

  // Fully free operator: one scalar per parameter entry per monomial up to
  // degree d (grid degrees in s and theta for the Volterra kernels).
  AffineOp indefinite_op_var(const std::string& name, int m1, int n1, int m2, int n2, int d) {
    AffineOp e = affine_const(PIOperator::zero(m1, n1, m2, n2, dom_));
    int count = 0;
    auto var = [&]() { return sdp_.add_free(name + "[" + std::to_string(count++) + "]"); };
    for (int i = 0; i < m2; ++i)
      for (int j = 0; j < m1; ++j) {
        PIOperator t = detail::zero_like(e.constant);
        t.P(i, j) = 1.0;
        e.terms.emplace(var(), t);
      }
    auto poly_part = [&](int rows, int cols, PolyMatrix PIOperator::*field, bool bivariate) {
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
          for (int ks = 0; ks <= d; ++ks)
            for (int kt = 0; kt <= (bivariate ? d : 0); ++kt) {
              PIOperator t = detail::zero_like(e.constant);
              (t.*field).at(i, j) = PolyScalar::monomial(1.0, ks, kt, dom_);
              e.terms.emplace(var(), t);
            }
    };
    poly_part(m2, n1, &PIOperator::Q1, false);
    poly_part(n2, m1, &PIOperator::Q2, false);
    poly_part(n2, n1, &PIOperator::R0, false);
    poly_part(n2, n1, &PIOperator::R1, true);
    poly_part(n2, n1, &PIOperator::R2, true);
    return e;
  }

  // Symmetric matrix variable as a finite-part affine operator backed by a
  // PSD block (used for W in the corollaries' Schur-complement constraints).
  AffineOp psd_matrix_var(const std::string& name, int n) {
    int blk = sdp_.add_block(name, n);
    AffineOp e = affine_const(PIOperator::from_matrix(Eigen::MatrixXd::Zero(n, n), dom_));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        PIOperator t = detail::zero_like(e.constant);
        t.P(i, j) = 1.0;
        if (i != j) t.P(j, i) = 1.0;
        e.terms.emplace(sdp_.entry_var(blk, i, j), t);
      }
    return e;
  }

  int free_var(const std::string& name) { return sdp_.add_free(name); }

  // e >= 0 (as an operator): introduce a Gram slack S and match e = S
  // coefficient by coefficient.  slack_degree < 0 selects the smallest degree
  // whose basis covers e's monomial support.
  void enforce_psd(const AffineOp& e, int slack_degree = -1) {
    const PIOperator& sh = e.constant;
    if (sh.m1 != sh.m2 || sh.n1 != sh.n2)
      throw std::invalid_argument("enforce_psd: expression is not square");
    check_self_adjoint(e);

    std::set<CoeffKey> support;
    collect_support(e.constant, support);
    for (auto& [k, op] : e.terms) collect_support(op, support);

    int d = slack_degree;
    GramBasis g;
    if (d >= 0) {
      g = make_gram_basis(sh.m1, sh.n1, d, dom_);
    } else {
      // The multiplier group costs O(d) rows while the Volterra group costs
      // O(d^2), so the cheapest covering basis is rarely the one with equal
      // degrees.  Enumerate (d_mult, d_volt) candidates by basis size and take
      // the first whose pair products cover the expression's support.
      int d_max = 0;
      for (auto& [cls, i, j, es, et] : support) d_max = std::max({d_max, es, et});
      const int mult_cap = std::max(d_max + 1, kMaxSlackDegree);
      std::vector<std::pair<int, std::pair<int, int>>> cand;
      for (int dm = 0; dm <= mult_cap; ++dm)
        for (int dvv = 0; dvv <= kMaxSlackDegree; ++dvv)
          cand.push_back({sh.m1 + sh.n1 * (dm + 1) + 2 * sh.n1 * (dvv + 1) * (dvv + 1),
                          {dm, dvv}});
      std::sort(cand.begin(), cand.end());
      bool found = false;
      for (auto& [q, dd] : cand) {
        g = make_gram_basis(sh.m1, sh.n1, dd.first, dd.second, dom_);
        if (covers(g, support)) {
          d = dd.second;
          found = true;
          break;
        }
      }
      if (!found)
        throw std::runtime_error(
            "enforce_psd: no slack Gram degree <= " + std::to_string(kMaxSlackDegree) +
            " covers the expression's monomials");
    }

    // rows: sum_k c_k v_k - sum_q c_q q = -c_const, one per coefficient key
    std::map<CoeffKey, SdpProblem::Row> rows;
    accumulate(e.constant, -1, rows, -1.0);  // folded into rhs
    for (auto& [k, op] : e.terms) accumulate(op, k, rows, 1.0);
    int blk = sdp_.add_block("slack" + std::to_string(slack_count_++) + "_d" + std::to_string(d),
                             g.q());
    for (int i = 0; i < g.q(); ++i)
      for (int j = i; j < g.q(); ++j)
        accumulate(g.pair_op(i, j), sdp_.entry_var(blk, i, j), rows, -1.0);

    for (auto& [key, row] : rows) {
      if (row.terms.empty()) {
        if (row.rhs != 0.0)
          throw std::runtime_error(
              "enforce_psd: monomial not representable at slack degree " + std::to_string(d));
        continue;
      }
      sdp_.equalities.push_back(std::move(row));
    }
  }

  void enforce_nsd(const AffineOp& e, int slack_degree = -1) {
    enforce_psd(affine_scale(e, -1.0), slack_degree);
  }

  // trace(e) <= bound for a finite-to-finite affine expression.
  void trace_le(const AffineOp& e, int bound_var) {
    const PIOperator& sh = e.constant;
    if (sh.n1 != 0 || sh.n2 != 0 || sh.m1 != sh.m2)
      throw std::invalid_argument("trace_le: expression must be square and purely finite");
    SdpProblem::Row row;
    double c0 = e.constant.P.trace();
    std::map<int, double> coeffs;
    for (auto& [k, op] : e.terms) coeffs[k] += op.P.trace();
    int slack_blk = sdp_.add_block("trace_slack" + std::to_string(slack_count_++), 1);
    for (auto& [k, c] : coeffs)
      if (c != 0.0) row.terms.push_back({k, c});
    row.terms.push_back({sdp_.entry_var(slack_blk, 0, 0), 1.0});
    row.terms.push_back({bound_var, -1.0});
    row.rhs = -c0;
    sdp_.equalities.push_back(std::move(row));
  }

  void minimize(int var) { sdp_.objective = {{var, 1.0}}; }

  const SdpProblem& compile() {
    sdp_.check();
    return sdp_;
  }

  // Substitute a solution back into an expression.
  PIOperator reconstruct(const AffineOp& e, const SdpSolution& sol) const {
    PIOperator r = e.constant;
    for (auto& [k, op] : e.terms) {
      double v = solution_value(sdp_, sol, k);
      if (v != 0.0) r = pi_add(r, pi_scale(op, v));
    }
    return r;
  }

 private:
  // (param class, row, col, s power, theta power); class 0 is the matrix part.
  using CoeffKey = std::tuple<int, int, int, int, int>;
  static constexpr int kMaxSlackDegree = 10;

  static void check_self_adjoint(const AffineOp& e) {
    const double tol = 1e-9;
    if (!e.constant.approx_equal(pi_adjoint(e.constant), tol))
      throw std::invalid_argument("enforce_psd: constant part is not self-adjoint");
    for (auto& [k, op] : e.terms)
      if (!op.approx_equal(pi_adjoint(op), tol))
        throw std::invalid_argument("enforce_psd: variable term is not self-adjoint");
  }

  template <typename Sink>
  static void for_each_coeff(const PIOperator& op, Sink sink) {
    for (int i = 0; i < op.m2; ++i)
      for (int j = 0; j < op.m1; ++j)
        if (op.P(i, j) != 0.0) sink(CoeffKey{0, i, j, 0, 0}, op.P(i, j));
    const PolyMatrix* fields[] = {&op.Q1, &op.Q2, &op.R0, &op.R1, &op.R2};
    for (int f = 0; f < 5; ++f)
      for (int i = 0; i < fields[f]->rows(); ++i)
        for (int j = 0; j < fields[f]->cols(); ++j)
          for (auto& [key, c] : fields[f]->at(i, j).terms())
            sink(CoeffKey{f + 1, i, j, key.first, key.second}, c);
  }

  static void collect_support(const PIOperator& op, std::set<CoeffKey>& out) {
    for_each_coeff(op, [&](const CoeffKey& k, double) { out.insert(k); });
  }

  static int required_degree_estimate(const std::set<CoeffKey>& support) {
    int maxdeg = 0;
    for (auto& [cls, i, j, es, et] : support) maxdeg = std::max(maxdeg, std::max(es, et));
    return (maxdeg + 1) / 2;
  }

  static bool covers(const GramBasis& g, const std::set<CoeffKey>& support) {
    std::set<CoeffKey> image;
    for (int i = 0; i < g.q(); ++i)
      for (int j = i; j < g.q(); ++j) collect_support(g.pair_op(i, j), image);
    for (const CoeffKey& k : support)
      if (!image.count(k)) return false;
    return true;
  }

  void accumulate(const PIOperator& op, int var, std::map<CoeffKey, SdpProblem::Row>& rows,
                  double sign) const {
    for_each_coeff(op, [&](const CoeffKey& k, double c) {
      SdpProblem::Row& row = rows[k];
      if (var < 0) row.rhs += sign * c;  // constant part goes to the rhs
      else row.terms.push_back({var, sign * c});
    });
  }

  Domain dom_;
  SdpProblem sdp_;
  int slack_count_ = 0;
};

}  // namespace pie

#endif  // PIE_LPI_HPP_
