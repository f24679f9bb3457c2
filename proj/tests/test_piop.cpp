#include <catch2/catch_amalgamated.hpp>

#include "pie/piop.hpp"
#include "test_util.hpp"

using namespace pie;
using namespace pie_test;

namespace {
const Domain kUnit{0.0, 1.0};

RL2Element make_fn(std::initializer_list<PolyScalar> entries) {
  RL2Element v;
  v.dom = kUnit;
  v.finite = Eigen::VectorXd(0);
  v.fn = PolyMatrix(int(entries.size()), 1, kUnit);
  int i = 0;
  for (auto& e : entries) v.fn.at(i++, 0) = e;
  return v;
}
}  // namespace

TEST_CASE("identity operator reproduces its input") {
  Rng rng(1);
  PIOperator id = PIOperator::identity(2, 3, kUnit);
  RL2Element v = random_element(rng, 2, 3, 4, kUnit);
  RL2Element w = pi_apply(id, v);
  CHECK((w.finite - v.finite).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(w.fn.approx_equal(v.fn, 1e-14));
}

TEST_CASE("beam T operator on simple inputs") {
  PIOperator t = beam_T();
  RL2Element v = make_fn({PolyScalar(1.0, kUnit), PolyScalar(0.0, kUnit)});
  RL2Element w = pi_apply(t, v);
  CHECK(w.fn.at(0, 0).approx_equal(PolyScalar::monomial(0.5, 2, 0, kUnit), 1e-14));
  CHECK(w.fn.at(1, 0).is_zero());

  // fn = (theta^2, 1): first channel integrates the Cauchy kernel, second the
  // reversed kernel; checked against quadrature as well.
  RL2Element u = make_fn({PolyScalar::monomial(1.0, 2, 0, kUnit), PolyScalar(1.0, kUnit)});
  RL2Element wu = pi_apply(t, u);
  CHECK(wu.fn.at(0, 0).approx_equal(PolyScalar::monomial(1.0 / 12.0, 4, 0, kUnit), 1e-13));
  PolyScalar half_sq = PolyScalar::monomial(0.5, 2, 0, kUnit) +
                       PolyScalar::monomial(-1.0, 1, 0, kUnit) + PolyScalar(0.5, kUnit);
  CHECK(wu.fn.at(1, 0).approx_equal(half_sq, 1e-13));
  for (double s = 0.05; s < 1.0; s += 0.24) {
    Eigen::VectorXd oracle = numeric_apply_fn(t, u, s);
    Eigen::VectorXd got = wu.fn.eval(s, 0.0).col(0);
    CHECK((got - oracle).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("addition and scaling") {
  Rng rng(7);
  PIOperator a = random_pi_op(rng, 1, 2, 1, 2, 3, kUnit);
  CHECK(pi_add(a, pi_scale(a, -1.0)).is_zero());

  PIOperator two_id = pi_scale(PIOperator::identity(1, 2, kUnit), 2.0);
  RL2Element v = random_element(rng, 1, 2, 3, kUnit);
  RL2Element w = pi_apply(two_id, v);
  CHECK((w.finite - 2.0 * v.finite).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(w.fn.approx_equal(v.fn.scaled(2.0), 1e-14));

  PIOperator b = random_pi_op(rng, 1, 2, 1, 2, 3, kUnit);
  RL2Element lhs = pi_apply(pi_add(a, b), v);
  RL2Element r1 = pi_apply(a, v), r2 = pi_apply(b, v);
  CHECK((lhs.finite - r1.finite - r2.finite).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(lhs.fn.approx_equal(r1.fn + r2.fn, 1e-12));
}

TEST_CASE("composition against the sequential-application oracle") {
  Rng rng(13);
  limits::DegreeGuard guard(40);

  PIOperator id = PIOperator::identity(1, 2, kUnit);
  PIOperator a = random_pi_op(rng, 1, 2, 1, 2, 3, kUnit);
  CHECK(pi_compose(id, a).approx_equal(a, 1e-12));
  CHECK(pi_compose(a, id).approx_equal(a, 1e-12));

  // multiplier x multiplier
  PIOperator ms = PIOperator::multiplier(
      PolyMatrix::identity(1, kUnit) * PolyMatrix::from_constant(Eigen::MatrixXd::Identity(1, 1), kUnit), kUnit);
  ms.R0.at(0, 0) = PolyScalar::var_s(kUnit);
  PIOperator m2 = pi_compose(ms, ms);
  CHECK(m2.R0.at(0, 0).approx_equal(PolyScalar::monomial(1.0, 2, 0, kUnit), 1e-14));
  CHECK(m2.R1.is_zero());
  CHECK(m2.R2.is_zero());

  // beam A o T against apply-then-apply on random degree-<=4 inputs
  PIOperator at = pi_compose(beam_A(), beam_T());
  for (int rep = 0; rep < 20; ++rep) {
    RL2Element v = random_element(rng, 0, 2, 4, kUnit);
    RL2Element lhs = pi_apply(at, v);
    RL2Element rhs = pi_apply(beam_A(), pi_apply(beam_T(), v));
    double scale = std::max(1.0, rhs.fn.max_abs_coeff());
    CHECK(lhs.fn.approx_equal(rhs.fn, 1e-9 * scale));
  }

  // random operators, mixed dims
  for (int rep = 0; rep < 25; ++rep) {
    int m1 = rng.uniform_int(0, 2), n1 = rng.uniform_int(1, 2);
    int mi = rng.uniform_int(0, 2), ni = rng.uniform_int(1, 2);
    int m2_ = rng.uniform_int(0, 2), n2_ = rng.uniform_int(1, 2);
    PIOperator b = random_pi_op(rng, m1, n1, mi, ni, 3, kUnit);
    PIOperator a2 = random_pi_op(rng, mi, ni, m2_, n2_, 3, kUnit);
    PIOperator c = pi_compose(a2, b);
    RL2Element v = random_element(rng, m1, n1, 4, kUnit);
    RL2Element lhs = pi_apply(c, v);
    RL2Element rhs = pi_apply(a2, pi_apply(b, v));
    double scale = std::max(1.0, rhs.fn.max_abs_coeff());
    CHECK(lhs.fn.approx_equal(rhs.fn, 1e-9 * scale));
    if (m2_ > 0) CHECK((lhs.finite - rhs.finite).cwiseAbs().maxCoeff() < 1e-9 * scale);
  }
}

TEST_CASE("composition is associative") {
  Rng rng(19);
  limits::DegreeGuard guard(64);
  for (int rep = 0; rep < 10; ++rep) {
    PIOperator a = random_pi_op(rng, 1, 1, 1, 1, 2, kUnit);
    PIOperator b = random_pi_op(rng, 1, 1, 1, 1, 2, kUnit);
    PIOperator c = random_pi_op(rng, 1, 1, 1, 1, 2, kUnit);
    PIOperator l = pi_compose(pi_compose(a, b), c);
    PIOperator r = pi_compose(a, pi_compose(b, c));
    double scale = std::max(1.0, r.max_abs_coeff());
    CHECK(l.approx_equal(r, 1e-9 * scale));
  }
}

TEST_CASE("adjoint") {
  Rng rng(29);
  limits::DegreeGuard guard(40);

  PIOperator id = PIOperator::identity(2, 2, kUnit);
  CHECK(pi_adjoint(id).approx_equal(id, 0.0));

  PIOperator a = random_pi_op(rng, 1, 2, 2, 1, 3, kUnit);
  CHECK(pi_adjoint(pi_adjoint(a)).approx_equal(a, 0.0));

  // inner-product contract for the beam T operator
  PIOperator t = beam_T();
  PIOperator tstar = pi_adjoint(t);
  for (int rep = 0; rep < 20; ++rep) {
    RL2Element v = random_element(rng, 0, 2, 4, kUnit);
    RL2Element w = random_element(rng, 0, 2, 4, kUnit);
    double lhs = rl2_inner(v, pi_apply(t, w));
    double rhs = rl2_inner(pi_apply(tstar, v), w);
    CHECK_THAT(lhs, Catch::Matchers::WithinAbs(rhs, 1e-10));
  }

  // contract on random operators with mixed finite/function channels
  for (int rep = 0; rep < 20; ++rep) {
    PIOperator op = random_pi_op(rng, 1, 2, 2, 1, 3, kUnit);
    RL2Element v = random_element(rng, 2, 1, 4, kUnit);
    RL2Element w = random_element(rng, 1, 2, 4, kUnit);
    double lhs = rl2_inner(v, pi_apply(op, w));
    double rhs = rl2_inner(pi_apply(pi_adjoint(op), v), w);
    double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    CHECK_THAT(lhs, Catch::Matchers::WithinAbs(rhs, 1e-10 * scale));
  }

  // algebra homomorphisms
  PIOperator x = random_pi_op(rng, 1, 1, 1, 1, 2, kUnit);
  PIOperator y = random_pi_op(rng, 1, 1, 1, 1, 2, kUnit);
  double scale = 1.0 + x.max_abs_coeff() * y.max_abs_coeff();
  CHECK(pi_adjoint(pi_compose(x, y)).approx_equal(
      pi_compose(pi_adjoint(y), pi_adjoint(x)), 1e-11 * scale));
  CHECK(pi_adjoint(pi_add(x, y)).approx_equal(pi_add(pi_adjoint(x), pi_adjoint(y)), 0.0));
}

TEST_CASE("block concatenation") {
  Rng rng(37);
  PIOperator id = PIOperator::identity(1, 1, kUnit);
  PIOperator d = pi_blockdiag(id, id);
  CHECK(d.approx_equal(PIOperator::identity(2, 2, kUnit), 0.0));

  PIOperator a = random_pi_op(rng, 1, 1, 1, 1, 3, kUnit);
  PIOperator z = PIOperator::zero(1, 1, 1, 1, kUnit);
  PIOperator va = pi_vert(a, z);
  RL2Element v = random_element(rng, 1, 1, 3, kUnit);
  RL2Element w = pi_apply(va, v);
  RL2Element wa = pi_apply(a, v);
  CHECK_THAT(w.finite(0), Catch::Matchers::WithinAbs(wa.finite(0), 1e-12));
  CHECK(w.fn.at(0, 0).approx_equal(wa.fn.at(0, 0), 1e-12));
  CHECK(w.fn.at(1, 0).is_zero());
  CHECK_THAT(w.finite(1), Catch::Matchers::WithinAbs(0.0, 1e-15));
}

TEST_CASE("finite trace") {
  limits::DegreeGuard guard(40);
  Domain dom = kUnit;
  // B: R -> L2, Q2 = (1,0)^T; trace(B* o B) = int_0^1 1 ds = 1
  PolyMatrix q2(2, 1, dom);
  q2.at(0, 0) = PolyScalar(1.0, dom);
  PIOperator b = PIOperator::column(q2, dom);
  PIOperator bb = pi_compose(pi_adjoint(b), b);
  CHECK_THAT(pi_finite_trace(bb), Catch::Matchers::WithinAbs(1.0, 1e-14));

  CHECK_THAT(pi_finite_trace(PIOperator::from_matrix(Eigen::MatrixXd::Identity(2, 2), dom)),
             Catch::Matchers::WithinAbs(2.0, 1e-15));

  PIOperator p2 = pi_scale(PIOperator::identity(0, 2, dom), 2.0);
  PIOperator bpb = pi_compose(pi_adjoint(b), pi_compose(p2, b));
  CHECK_THAT(pi_finite_trace(bpb), Catch::Matchers::WithinAbs(2.0, 1e-14));

  CHECK_THROWS_AS(pi_finite_trace(PIOperator::identity(1, 1, dom)), std::invalid_argument);
}

TEST_CASE("operator json round-trip") {
  Rng rng(41);
  PIOperator a = random_pi_op(rng, 1, 2, 2, 1, 3, kUnit);
  PIOperator back = pi_operator_from_json(to_json(a));
  CHECK(back.approx_equal(a, 0.0));
}

TEST_CASE("dimension mismatches are rejected") {
  Rng rng(43);
  PIOperator a = random_pi_op(rng, 1, 1, 1, 1, 2, kUnit);
  PIOperator b = random_pi_op(rng, 1, 1, 2, 1, 2, kUnit);
  CHECK_THROWS_AS(pi_add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(pi_compose(a, b), std::invalid_argument);
  RL2Element v = random_element(rng, 2, 1, 2, kUnit);
  CHECK_THROWS_AS(pi_apply(a, v), std::invalid_argument);
}
