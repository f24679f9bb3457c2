#ifndef PIE_POLY_HPP_
#define PIE_POLY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace pie {

struct Domain {
  double a = 0.0;
  double b = 1.0;
  bool operator==(const Domain& o) const { return a == o.a && b == o.b; }
  double width() const { return b - a; }
};

inline void check_same_domain(const Domain& x, const Domain& y) {
  if (!(x == y)) throw std::invalid_argument("domain mismatch");
}

// Coefficients below this magnitude are pruned during canonicalization.
inline constexpr double kCoeffZeroTol = 1e-14;

namespace limits {
inline int& max_total_degree() {
  static int v = 16;
  return v;
}
// Temporarily raises the degree cap (operator compositions inside the LPI
// machinery legitimately exceed the user-facing default).
struct DegreeGuard {
  int saved;
  explicit DegreeGuard(int d) : saved(max_total_degree()) { max_total_degree() = d; }
  ~DegreeGuard() { max_total_degree() = saved; }
};
}  // namespace limits

enum class Var : std::uint8_t { S, Theta };

// Integration bound: a domain endpoint or one of the spatial variables.
enum class Bound : std::uint8_t { A, B, S, Theta };

// Real polynomial in the spatial variables s and theta on [a,b], stored as a
// sparse exponent->coefficient map.
class PolyScalar {
 public:
  using Key = std::pair<int, int>;  // (s exponent, theta exponent)

  PolyScalar() = default;
  explicit PolyScalar(Domain dom) : dom_(dom) {}
  PolyScalar(double c, Domain dom) : dom_(dom) {
    if (std::abs(c) >= kCoeffZeroTol) terms_[{0, 0}] = c;
  }

  static PolyScalar monomial(double c, int es, int et, Domain dom) {
    PolyScalar p(dom);
    if (es < 0 || et < 0) throw std::invalid_argument("negative exponent");
    if (std::abs(c) >= kCoeffZeroTol) p.terms_[{es, et}] = c;
    return p;
  }
  static PolyScalar var_s(Domain dom) { return monomial(1.0, 1, 0, dom); }
  static PolyScalar var_theta(Domain dom) { return monomial(1.0, 0, 1, dom); }

  const Domain& domain() const { return dom_; }
  const std::map<Key, double>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  int degree_s() const {
    int d = 0;
    for (auto& [k, c] : terms_) d = std::max(d, k.first);
    return d;
  }
  int degree_theta() const {
    int d = 0;
    for (auto& [k, c] : terms_) d = std::max(d, k.second);
    return d;
  }
  int total_degree() const {
    int d = 0;
    for (auto& [k, c] : terms_) d = std::max(d, k.first + k.second);
    return d;
  }

  void add_term(int es, int et, double c) {
    if (es + et > limits::max_total_degree())
      throw std::runtime_error("polynomial degree overflow (cap " +
                               std::to_string(limits::max_total_degree()) + ")");
    double& slot = terms_[{es, et}];
    slot += c;
    if (std::abs(slot) < kCoeffZeroTol) terms_.erase({es, et});
  }

  PolyScalar operator+(const PolyScalar& o) const {
    check_same_domain(dom_, o.dom_);
    PolyScalar r = *this;
    for (auto& [k, c] : o.terms_) r.add_term(k.first, k.second, c);
    return r;
  }
  PolyScalar operator-(const PolyScalar& o) const { return *this + o.scaled(-1.0); }

  PolyScalar scaled(double c) const {
    PolyScalar r(dom_);
    if (std::abs(c) < kCoeffZeroTol) return r;
    for (auto& [k, v] : terms_) {
      double cv = c * v;
      if (std::abs(cv) >= kCoeffZeroTol) r.terms_[k] = cv;
    }
    return r;
  }

  PolyScalar operator*(const PolyScalar& o) const {
    check_same_domain(dom_, o.dom_);
    PolyScalar r(dom_);
    for (auto& [ka, ca] : terms_)
      for (auto& [kb, cb] : o.terms_)
        r.add_term(ka.first + kb.first, ka.second + kb.second, ca * cb);
    return r;
  }

  double eval(double s, double theta) const {
    double acc = 0.0;
    for (auto& [k, c] : terms_)
      acc += c * std::pow(s, k.first) * std::pow(theta, k.second);
    return acc;
  }

  // Relabels variables under a bijection of {s,theta}; swap is the only
  // non-trivial case.
  PolyScalar swapped() const {
    PolyScalar r(dom_);
    for (auto& [k, c] : terms_) r.terms_[{k.second, k.first}] = c;
    return r;
  }

  PolyScalar derivative(Var v) const {
    PolyScalar r(dom_);
    for (auto& [k, c] : terms_) {
      if (v == Var::S && k.first > 0) r.add_term(k.first - 1, k.second, c * k.first);
      if (v == Var::Theta && k.second > 0) r.add_term(k.first, k.second - 1, c * k.second);
    }
    return r;
  }

  // Definite integral over `v` between the given bounds.  Bounds may be the
  // domain endpoints or the other spatial variable; integrating over a
  // variable that appears in its own bound set is rejected.
  PolyScalar integrate(Var v, Bound lo, Bound hi) const {
    auto bad = [&](Bound bnd) {
      return (v == Var::S && bnd == Bound::S) || (v == Var::Theta && bnd == Bound::Theta);
    };
    if (bad(lo) || bad(hi))
      throw std::invalid_argument("integration bound refers to the integration variable");
    PolyScalar r(dom_);
    for (auto& [k, c] : terms_) {
      int e = (v == Var::S) ? k.first : k.second;
      int other = (v == Var::S) ? k.second : k.first;
      double cc = c / double(e + 1);
      // antiderivative power e+1, evaluated at hi minus at lo
      for (int sign = 0; sign < 2; ++sign) {
        Bound bnd = sign == 0 ? hi : lo;
        double sgn = sign == 0 ? 1.0 : -1.0;
        int es = 0, et = 0;
        double coef = sgn * cc;
        switch (bnd) {
          case Bound::A: coef *= std::pow(dom_.a, e + 1); break;
          case Bound::B: coef *= std::pow(dom_.b, e + 1); break;
          case Bound::S: es = e + 1; break;
          case Bound::Theta: et = e + 1; break;
        }
        if (v == Var::S) et += other; else es += other;
        if (std::abs(coef) >= kCoeffZeroTol) r.add_term(es, et, coef);
      }
    }
    return r;
  }

  bool approx_equal(const PolyScalar& o, double tol) const {
    PolyScalar d = *this - o;
    for (auto& [k, c] : d.terms_)
      if (std::abs(c) > tol) return false;
    return true;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (auto& [k, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

 private:
  Domain dom_;
  std::map<Key, double> terms_;
};

// h(s,theta) = \int_lo^hi f(s,eta) g(eta,theta) deta, where f's theta slot and
// g's s slot are read as the dummy variable eta.  This is the workhorse for
// Volterra kernel compositions; bounds S/Theta refer to the free variables of
// the result.
inline PolyScalar conv_integral(const PolyScalar& f, const PolyScalar& g, Bound lo, Bound hi) {
  check_same_domain(f.domain(), g.domain());
  const Domain dom = f.domain();
  PolyScalar r(dom);
  for (auto& [kf, cf] : f.terms()) {
    for (auto& [kg, cg] : g.terms()) {
      int m = kf.second + kg.first;  // eta power
      double cc = cf * cg / double(m + 1);
      for (int sign = 0; sign < 2; ++sign) {
        Bound bnd = sign == 0 ? hi : lo;
        double sgn = sign == 0 ? 1.0 : -1.0;
        int es = kf.first, et = kg.second;
        double coef = sgn * cc;
        switch (bnd) {
          case Bound::A: coef *= std::pow(dom.a, m + 1); break;
          case Bound::B: coef *= std::pow(dom.b, m + 1); break;
          case Bound::S: es += m + 1; break;
          case Bound::Theta: et += m + 1; break;
        }
        if (std::abs(coef) >= kCoeffZeroTol) r.add_term(es, et, coef);
      }
    }
  }
  return r;
}

// Dense matrix of sparse polynomials sharing one domain.
class PolyMatrix {
 public:
  PolyMatrix() : rows_(0), cols_(0) {}
  PolyMatrix(int rows, int cols, Domain dom)
      : rows_(rows), cols_(cols), dom_(dom),
        entries_(std::size_t(rows) * cols, PolyScalar(dom)) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative shape");
  }

  static PolyMatrix identity(int n, Domain dom) {
    PolyMatrix m(n, n, dom);
    for (int i = 0; i < n; ++i) m.at(i, i) = PolyScalar(1.0, dom);
    return m;
  }
  static PolyMatrix from_constant(const Eigen::MatrixXd& c, Domain dom) {
    PolyMatrix m(int(c.rows()), int(c.cols()), dom);
    for (int i = 0; i < c.rows(); ++i)
      for (int j = 0; j < c.cols(); ++j)
        m.at(i, j) = PolyScalar(c(i, j), dom);
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const Domain& domain() const { return dom_; }

  PolyScalar& at(int i, int j) { return entries_[std::size_t(i) * cols_ + j]; }
  const PolyScalar& at(int i, int j) const { return entries_[std::size_t(i) * cols_ + j]; }

  bool is_zero() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const PolyScalar& p) { return p.is_zero(); });
  }

  PolyMatrix operator+(const PolyMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw std::invalid_argument("shape mismatch in add");
    check_same_domain(dom_, o.dom_);
    PolyMatrix r(rows_, cols_, dom_);
    for (std::size_t i = 0; i < entries_.size(); ++i) r.entries_[i] = entries_[i] + o.entries_[i];
    return r;
  }
  PolyMatrix operator-(const PolyMatrix& o) const { return *this + o.scaled(-1.0); }

  PolyMatrix scaled(double c) const {
    PolyMatrix r(rows_, cols_, dom_);
    for (std::size_t i = 0; i < entries_.size(); ++i) r.entries_[i] = entries_[i].scaled(c);
    return r;
  }

  PolyMatrix operator*(const PolyMatrix& o) const {
    if (cols_ != o.rows_) throw std::invalid_argument("inner dimension mismatch in mul");
    check_same_domain(dom_, o.dom_);
    PolyMatrix r(rows_, o.cols_, dom_);
    for (int i = 0; i < rows_; ++i)
      for (int k = 0; k < cols_; ++k) {
        const PolyScalar& aik = at(i, k);
        if (aik.is_zero()) continue;
        for (int j = 0; j < o.cols_; ++j) {
          const PolyScalar& bkj = o.at(k, j);
          if (bkj.is_zero()) continue;
          r.at(i, j) = r.at(i, j) + aik * bkj;
        }
      }
    return r;
  }

  PolyMatrix transpose() const {
    PolyMatrix r(cols_, rows_, dom_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) r.at(j, i) = at(i, j);
    return r;
  }

  PolyMatrix swapped() const {
    PolyMatrix r(rows_, cols_, dom_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) r.at(i, j) = at(i, j).swapped();
    return r;
  }

  PolyMatrix derivative(Var v) const {
    PolyMatrix r(rows_, cols_, dom_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) r.at(i, j) = at(i, j).derivative(v);
    return r;
  }

  PolyMatrix integrate(Var v, Bound lo, Bound hi) const {
    PolyMatrix r(rows_, cols_, dom_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) r.at(i, j) = at(i, j).integrate(v, lo, hi);
    return r;
  }

  Eigen::MatrixXd eval(double s, double theta) const {
    Eigen::MatrixXd m(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) m(i, j) = at(i, j).eval(s, theta);
    return m;
  }

  bool approx_equal(const PolyMatrix& o, double tol) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) return false;
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j)
        if (!at(i, j).approx_equal(o.at(i, j), tol)) return false;
    return true;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (auto& e : entries_) m = std::max(m, e.max_abs_coeff());
    return m;
  }

  static PolyMatrix hcat(const PolyMatrix& l, const PolyMatrix& r) {
    if (l.rows_ != r.rows_) throw std::invalid_argument("hcat row mismatch");
    check_same_domain(l.dom_, r.dom_);
    PolyMatrix m(l.rows_, l.cols_ + r.cols_, l.dom_);
    for (int i = 0; i < l.rows_; ++i) {
      for (int j = 0; j < l.cols_; ++j) m.at(i, j) = l.at(i, j);
      for (int j = 0; j < r.cols_; ++j) m.at(i, l.cols_ + j) = r.at(i, j);
    }
    return m;
  }
  static PolyMatrix vcat(const PolyMatrix& t, const PolyMatrix& b) {
    if (t.cols_ != b.cols_) throw std::invalid_argument("vcat col mismatch");
    check_same_domain(t.dom_, b.dom_);
    PolyMatrix m(t.rows_ + b.rows_, t.cols_, t.dom_);
    for (int j = 0; j < t.cols_; ++j) {
      for (int i = 0; i < t.rows_; ++i) m.at(i, j) = t.at(i, j);
      for (int i = 0; i < b.rows_; ++i) m.at(t.rows_ + i, j) = b.at(i, j);
    }
    return m;
  }

  PolyMatrix block(int i0, int j0, int nr, int nc) const {
    PolyMatrix m(nr, nc, dom_);
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nc; ++j) m.at(i, j) = at(i0 + i, j0 + j);
    return m;
  }

  void set_block(int i0, int j0, const PolyMatrix& src) {
    for (int i = 0; i < src.rows_; ++i)
      for (int j = 0; j < src.cols_; ++j) at(i0 + i, j0 + j) = src.at(i, j);
  }

 private:
  int rows_, cols_;
  Domain dom_;
  std::vector<PolyScalar> entries_;
};

// Entrywise Kronecker-style convolution integral for matrices:
// H(s,theta) = \int_lo^hi F(s,eta) G(eta,theta) deta  (matrix product inside).
inline PolyMatrix conv_integral(const PolyMatrix& F, const PolyMatrix& G, Bound lo, Bound hi) {
  if (F.cols() != G.rows()) throw std::invalid_argument("conv_integral inner dimension mismatch");
  check_same_domain(F.domain(), G.domain());
  PolyMatrix H(F.rows(), G.cols(), F.domain());
  for (int i = 0; i < F.rows(); ++i)
    for (int k = 0; k < F.cols(); ++k) {
      if (F.at(i, k).is_zero()) continue;
      for (int j = 0; j < G.cols(); ++j) {
        if (G.at(k, j).is_zero()) continue;
        H.at(i, j) = H.at(i, j) + conv_integral(F.at(i, k), G.at(k, j), lo, hi);
      }
    }
  return H;
}

// --- JSON serialization -----------------------------------------------------

inline nlohmann::json to_json(const PolyScalar& p) {
  nlohmann::json terms = nlohmann::json::array();
  for (auto& [k, c] : p.terms())
    terms.push_back({{"i_s", k.first}, {"i_theta", k.second}, {"coeff", c}});
  return terms;
}

inline PolyScalar poly_scalar_from_json(const nlohmann::json& j, Domain dom) {
  PolyScalar p(dom);
  for (auto& t : j)
    p.add_term(t.at("i_s").get<int>(), t.at("i_theta").get<int>(), t.at("coeff").get<double>());
  return p;
}

inline nlohmann::json to_json(const PolyMatrix& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) entries.push_back(to_json(m.at(i, j)));
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"domain", {m.domain().a, m.domain().b}},
          {"entries", entries}};
}

inline PolyMatrix poly_matrix_from_json(const nlohmann::json& j) {
  Domain dom{j.at("domain")[0].get<double>(), j.at("domain")[1].get<double>()};
  PolyMatrix m(j.at("rows").get<int>(), j.at("cols").get<int>(), dom);
  int idx = 0;
  for (int i = 0; i < m.rows(); ++i)
    for (int c = 0; c < m.cols(); ++c)
      m.at(i, c) = poly_scalar_from_json(j.at("entries")[idx++], dom);
  return m;
}

}  // namespace pie

#endif  // PIE_POLY_HPP_
