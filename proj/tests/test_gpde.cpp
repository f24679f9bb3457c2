#include <catch2/catch_amalgamated.hpp>

#include "pie/config.hpp"
#include "pie/expr.hpp"
#include "pie/gpde.hpp"
#include "test_util.hpp"

using namespace pie;
using namespace pie_test;

namespace {

const Domain kUnit{0.0, 1.0};

GpdeSystem reaction_diffusion() {
  GpdeSystem g;
  g.dom = kUnit;
  g.n_x = 1;
  g.order = 2;
  g.A = {parse_poly_matrix("3", kUnit), PolyMatrix(1, 1, kUnit), parse_poly_matrix("s^2 + 0.2", kUnit)};
  g.b1 = parse_poly_matrix("(s^2 - 2*s)/2", kUnit);
  g.b2 = parse_poly_matrix("1", kUnit);
  g.Bb = Eigen::MatrixXd::Zero(2, 4);
  g.Bb(0, 0) = 1.0;  // x(0) = 0
  g.Bb(1, 3) = 1.0;  // x_s(1) = 0
  g.Cz = {parse_poly_matrix("1; 0", kUnit), PolyMatrix(2, 1, kUnit), PolyMatrix(2, 1, kUnit)};
  g.D12 = Eigen::MatrixXd::Zero(2, 1);
  g.D12(1, 0) = 1.0;
  g.Cy = Eigen::MatrixXd::Zero(1, 4);
  g.Cy(0, 2) = 1.0;  // y = x(1) + w
  g.D21 = Eigen::MatrixXd::Ones(1, 1);
  return g;
}

GpdeSystem beam_example() {
  GpdeSystem g;
  g.dom = kUnit;
  g.n_x = 2;
  g.order = 2;
  g.A = {PolyMatrix(2, 2, kUnit), PolyMatrix(2, 2, kUnit), parse_poly_matrix("0, -0.1; 1, 0", kUnit)};
  g.b1 = parse_poly_matrix("1; 0", kUnit);
  g.b2 = parse_poly_matrix("1; 0", kUnit);
  g.Bb = Eigen::MatrixXd::Zero(4, 8);
  g.Bb(0, 0) = 1.0;  // x1(0)
  g.Bb(1, 2) = 1.0;  // x1_s(0)
  g.Bb(2, 5) = 1.0;  // x2(1)
  g.Bb(3, 7) = 1.0;  // x2_s(1)
  g.Cz = {parse_poly_matrix("0, 1 - s - s^2; 0, 0", kUnit), PolyMatrix(2, 2, kUnit),
          PolyMatrix(2, 2, kUnit)};
  g.D12 = Eigen::MatrixXd::Zero(2, 1);
  g.D12(1, 0) = 1.0;
  g.Cy = Eigen::MatrixXd::Zero(1, 8);
  g.Cy(0, 4) = 1.0;  // y = x1(1) + w
  g.D21 = Eigen::MatrixXd::Ones(1, 1);
  return g;
}

PolyScalar mono(double c, int es, int et) { return PolyScalar::monomial(c, es, et, kUnit); }

}  // namespace

TEST_CASE("polynomial expression parser") {
  PolyScalar p = parse_poly("(s^2 - 2*s)/2", kUnit);
  CHECK(p.approx_equal(mono(0.5, 2, 0) + mono(-1.0, 1, 0), 1e-12));

  CHECK(parse_poly("3 + 0.25*s*theta - s^3", kUnit)
            .approx_equal(mono(3.0, 0, 0) + mono(0.25, 1, 1) + mono(-1.0, 3, 0), 1e-12));
  CHECK(parse_poly("-(1 - s)^2", kUnit)
            .approx_equal(mono(-1.0, 0, 0) + mono(2.0, 1, 0) + mono(-1.0, 2, 0), 1e-12));
  CHECK(parse_poly("theta", kUnit).approx_equal(PolyScalar::var_theta(kUnit), 1e-12));
  CHECK(parse_poly("2^3", kUnit).eval(0.0, 0.0) == 8.0);

  PolyMatrix m = parse_poly_matrix("1, s; theta, (s - theta)^2", kUnit);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  CHECK(m.at(1, 1).approx_equal(mono(1.0, 2, 0) + mono(-2.0, 1, 1) + mono(1.0, 0, 2), 1e-12));

  CHECK_THROWS_AS(parse_poly("s/theta", kUnit), std::invalid_argument);
  CHECK_THROWS_AS(parse_poly("1/0", kUnit), std::invalid_argument);
  CHECK_THROWS_AS(parse_poly("x + 1", kUnit), std::invalid_argument);
  CHECK_THROWS_AS(parse_poly("s +", kUnit), std::invalid_argument);
  CHECK_THROWS_AS(parse_poly("(s", kUnit), std::invalid_argument);
  CHECK_THROWS_AS(parse_poly("s^theta", kUnit), std::invalid_argument);
  CHECK_THROWS_AS(parse_poly_matrix("1, s; theta", kUnit), std::invalid_argument);
}

TEST_CASE("fundamental identity, first order") {
  Eigen::MatrixXd bb(1, 2);
  bb << 1.0, 0.0;  // x(a) = 0
  FundamentalIdentity fi = fundamental_identity(1, 1, bb, kUnit);
  REQUIRE(fi.deriv_map.size() == 2);

  const PIOperator& t = fi.deriv_map[0];
  CHECK(t.R0.is_zero());
  CHECK(t.R1.at(0, 0).approx_equal(PolyScalar(1.0, kUnit), 1e-10));
  CHECK(t.R2.is_zero());
  CHECK(fi.deriv_map[1].approx_equal(PIOperator::identity(0, 1, kUnit), 1e-12));

  // trace kernel: x(a) row vanishes, x(b) = int_a^b core
  CHECK(fi.trace_kernel.at(0, 0).is_zero());
  CHECK(fi.trace_kernel.at(1, 0).approx_equal(PolyScalar(1.0, kUnit), 1e-10));
}

TEST_CASE("fundamental identity, Dirichlet ends") {
  Eigen::MatrixXd bb = Eigen::MatrixXd::Zero(2, 4);
  bb(0, 0) = 1.0;  // x(0) = 0
  bb(1, 2) = 1.0;  // x(1) = 0
  FundamentalIdentity fi = fundamental_identity(2, 1, bb, kUnit);
  const PIOperator& t = fi.deriv_map[0];

  // Green-type kernels: R1 = theta (s - 1), R2 = s (theta - 1)
  CHECK(t.R1.at(0, 0).approx_equal(mono(1.0, 1, 1) - mono(1.0, 0, 1), 1e-10));
  CHECK(t.R2.at(0, 0).approx_equal(mono(1.0, 1, 1) - mono(1.0, 1, 0), 1e-10));

  // apply-oracle: core = 2 must recover x = s^2 - s
  RL2Element v;
  v.dom = kUnit;
  v.finite = Eigen::VectorXd(0);
  v.fn = parse_poly_matrix("2", kUnit);
  for (double s : {0.0, 0.17, 0.5, 0.83, 1.0}) {
    double expect = s * s - s;
    CHECK_THAT(numeric_apply_fn(t, v, s)(0), Catch::Matchers::WithinAbs(expect, 1e-10));
  }

  // first-derivative map recovers 2s - 1 from core = 2
  for (double s : {0.1, 0.6, 0.9})
    CHECK_THAT(numeric_apply_fn(fi.deriv_map[1], v, s)(0), Catch::Matchers::WithinAbs(2.0 * s - 1.0, 1e-10));
}

TEST_CASE("fundamental identity inverts differentiation on admissible states") {
  Rng rng(71);
  Eigen::MatrixXd bb = Eigen::MatrixXd::Zero(2, 4);
  bb(0, 0) = 1.0;
  bb(1, 2) = 1.0;
  FundamentalIdentity fi = fundamental_identity(2, 1, bb, kUnit);
  for (int rep = 0; rep < 5; ++rep) {
    // p = s (1 - s) q(s) satisfies the Dirichlet conditions
    PolyScalar q = random_poly(rng, 3, kUnit, false);
    PolyScalar p = (mono(1.0, 1, 0) - mono(1.0, 2, 0)) * q;
    PolyScalar core = p.derivative(Var::S).derivative(Var::S);
    RL2Element v;
    v.dom = kUnit;
    v.finite = Eigen::VectorXd(0);
    v.fn = PolyMatrix(1, 1, kUnit);
    v.fn.at(0, 0) = core;
    for (double s : {0.08, 0.35, 0.71, 0.94})
      CHECK_THAT(numeric_apply_fn(fi.deriv_map[0], v, s)(0),
                 Catch::Matchers::WithinAbs(p.eval(s, 0.0), 1e-9));
  }
}

TEST_CASE("ill-posed boundary conditions are rejected") {
  // full-row-rank Bb whose elimination matrix is singular: x(b) - x(a) = 0
  // for N=1 leaves the constant mode undetermined.
  Eigen::MatrixXd bb(1, 2);
  bb << -1.0, 1.0;
  CHECK_THROWS_AS(fundamental_identity(1, 1, bb, kUnit), std::runtime_error);

  GpdeSystem g = reaction_diffusion();
  g.Bb.row(1) = g.Bb.row(0);  // rank deficient
  CHECK_THROWS_AS(g.check(), std::invalid_argument);
}

TEST_CASE("beam example converts to the published PIE parameters") {
  PieSystem p = convert_to_pie(beam_example());

  PIOperator t_expect = beam_T();
  CHECK(p.T.approx_equal(t_expect, 1e-10));
  CHECK(p.A.approx_equal(beam_A(), 1e-10));
  CHECK(p.B1.approx_equal(beam_B(), 1e-10));
  CHECK(p.B2.approx_equal(beam_B(), 1e-10));

  // C1's first row is the published Q1; second row is all zero (u enters via D12)
  CHECK(p.C1.Q1.at(0, 0).is_zero());
  CHECK(p.C1.Q1.at(0, 1).approx_equal(mono(0.5, 2, 0) + mono(-1.0 / 6.0, 3, 0) + mono(-1.0 / 12.0, 4, 0),
                                      1e-10));
  CHECK(p.C1.Q1.at(1, 0).is_zero());
  CHECK(p.C1.Q1.at(1, 1).is_zero());
  CHECK(p.D12(0, 0) == 0.0);
  CHECK(p.D12(1, 0) == 1.0);

  ValidationReport rep = validate_pie(p);
  CHECK(rep.ok);
}

TEST_CASE("reaction-diffusion example converts with the expected structure") {
  PieSystem p = convert_to_pie(reaction_diffusion());

  CHECK(p.T.R0.is_zero());
  CHECK(p.T.R1.at(0, 0).approx_equal(mono(-1.0, 0, 1), 1e-10));
  CHECK(p.T.R2.at(0, 0).approx_equal(mono(-1.0, 1, 0), 1e-10));

  CHECK(p.A.R0.at(0, 0).approx_equal(mono(1.0, 2, 0) + mono(0.2, 0, 0), 1e-10));
  CHECK(p.A.R1.at(0, 0).approx_equal(mono(-3.0, 0, 1), 1e-10));
  CHECK(p.A.R2.at(0, 0).approx_equal(mono(-3.0, 1, 0), 1e-10));

  CHECK(p.B1.Q2.at(0, 0).approx_equal(mono(0.5, 2, 0) + mono(-1.0, 1, 0), 1e-10));
  CHECK(p.C1.Q1.at(0, 0).approx_equal(mono(0.5, 2, 0) + mono(-1.0, 1, 0), 1e-10));
  CHECK(p.C1.Q1.at(1, 0).is_zero());

  // y = x(1) through the eliminated trace: kernel -s
  CHECK(p.C2.Q1.at(0, 0).approx_equal(mono(-1.0, 1, 0), 1e-10));
  CHECK(p.D21(0, 0) == 1.0);

  CHECK(validate_pie(p).ok);
}

TEST_CASE("zero dynamics produce the zero operator") {
  GpdeSystem g = reaction_diffusion();
  for (auto& a : g.A) a = PolyMatrix(1, 1, kUnit);
  PieSystem p = convert_to_pie(g);
  CHECK(p.A.is_zero());
}

TEST_CASE("manufactured solution satisfies the PIE dynamics") {
  // x(t,s) = phi(t) psi(s), psi = (s^2 - 2s)/2 meets x(0)=0, x_s(1)=0.
  // With core = psi'' phi = phi, the PIE requires T(phi' core) = A(phi core)
  // at phi-coefficient level: phi'(t) psi(s) = phi(t) [3 psi + (s^2+0.2)]
  // cannot hold for generic phi, so instead check both sides against the PDE
  // operator directly: A applied to psi'' equals 3 psi + (s^2+0.2) psi''.
  PieSystem p = convert_to_pie(reaction_diffusion());
  PolyScalar psi = mono(0.5, 2, 0) + mono(-1.0, 1, 0);
  PolyScalar core = psi.derivative(Var::S).derivative(Var::S);  // == 1
  RL2Element v;
  v.dom = kUnit;
  v.finite = Eigen::VectorXd(0);
  v.fn = PolyMatrix(1, 1, kUnit);
  v.fn.at(0, 0) = core;
  for (double s : {0.05, 0.3, 0.55, 0.8, 0.95}) {
    double pde_rhs = 3.0 * psi.eval(s, 0.0) + (s * s + 0.2) * core.eval(s, 0.0);
    CHECK_THAT(numeric_apply_fn(p.A, v, s)(0), Catch::Matchers::WithinAbs(pde_rhs, 1e-8));
    CHECK_THAT(numeric_apply_fn(p.T, v, s)(0), Catch::Matchers::WithinAbs(psi.eval(s, 0.0), 1e-8));
  }
  // regulated output channel 1 equals int psi ds
  double z1 = numeric_apply_finite(p.C1, v)(0);
  CHECK_THAT(z1, Catch::Matchers::WithinAbs(quad([&](double s) { return psi.eval(s, 0.0); }, 0.0, 1.0), 1e-8));
  // observed output equals psi(1)
  CHECK_THAT(numeric_apply_finite(p.C2, v)(0), Catch::Matchers::WithinAbs(psi.eval(1.0, 0.0), 1e-8));
}

TEST_CASE("validate_pie flags inconsistencies") {
  PieSystem p = convert_to_pie(beam_example());
  REQUIRE(validate_pie(p).ok);

  PieSystem bad = p;
  bad.B1 = PIOperator::zero(3, 0, 0, 2, kUnit);
  ValidationReport rep = validate_pie(bad);
  CHECK_FALSE(rep.ok);
  REQUIRE_FALSE(rep.issues.empty());

  PieSystem bad2 = p;
  bad2.nz = 5;
  CHECK_FALSE(validate_pie(bad2).ok);
}

TEST_CASE("config fixtures load and reproduce the conversions") {
  GpdeConfig rd = load_gpde_config(std::string(PIE_FIXTURE_DIR) + "/react_diff.cfg");
  PieSystem p_rd = convert_to_pie(rd.sys);
  PieSystem p_rd_direct = convert_to_pie(reaction_diffusion());
  CHECK(p_rd.T.approx_equal(p_rd_direct.T, 1e-12));
  CHECK(p_rd.A.approx_equal(p_rd_direct.A, 1e-12));
  CHECK(p_rd.B1.approx_equal(p_rd_direct.B1, 1e-12));
  CHECK(p_rd.C1.approx_equal(p_rd_direct.C1, 1e-12));
  CHECK(p_rd.C2.approx_equal(p_rd_direct.C2, 1e-12));
  CHECK(rd.sim.has_ic);
  CHECK(rd.sim.ic.at(0, 0).approx_equal(mono(0.5, 2, 0) + mono(-1.0, 1, 0), 1e-12));

  GpdeConfig eb = load_gpde_config(std::string(PIE_FIXTURE_DIR) + "/eb_beam.cfg");
  PieSystem p_eb = convert_to_pie(eb.sys);
  CHECK(p_eb.T.approx_equal(beam_T(), 1e-10));
  CHECK(p_eb.A.approx_equal(beam_A(), 1e-10));
  CHECK(p_eb.B1.Q2.at(0, 0).approx_equal(mono(-0.5, 2, 0), 1e-12));
  CHECK(p_eb.B2.approx_equal(beam_B(), 1e-10));
  CHECK(p_eb.C1.Q1.at(0, 1).approx_equal(beam_C().Q1.at(0, 1), 1e-10));
  CHECK(p_eb.C1.Q1.at(1, 1).is_zero());
  CHECK(eb.sys.ny() == 1);
  CHECK(eb.sys.D21(0, 0) == 1.0);

  GpdeConfig heat = load_gpde_config(std::string(PIE_FIXTURE_DIR) + "/heat.cfg");
  PieSystem p_heat = convert_to_pie(heat.sys);
  CHECK(p_heat.T.R1.at(0, 0).approx_equal(mono(1.0, 1, 1) - mono(1.0, 0, 1), 1e-10));
  CHECK(p_heat.ny == 0);
}

TEST_CASE("config errors are reported") {
  auto from_text = [](const std::string& text) {
    std::istringstream in(text);
    return gpde_from_config(ConfigFile::parse(in));
  };
  CHECK_THROWS_AS(from_text("[domain]\na = 1\nb = 0\n"), std::invalid_argument);
  CHECK_THROWS_AS(from_text("[domain]\na = 0\nb = 1\n[states]\ncount = 1\norder = 3\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(from_text("[domain]\na = 0\nb = 1\n[states]\ncount = 1\norder = 1\n"
                            "[bcs]\nrow = 1 0 0\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(ConfigFile::load("/nonexistent/path.cfg"), std::invalid_argument);
}

TEST_CASE("PIE system JSON round trip") {
  PieSystem p = convert_to_pie(beam_example());
  nlohmann::json j = to_json(p);
  PieSystem q = pie_system_from_json(j);
  CHECK(q.T.approx_equal(p.T, 0.0));
  CHECK(q.A.approx_equal(p.A, 0.0));
  CHECK(q.B1.approx_equal(p.B1, 0.0));
  CHECK(q.B2.approx_equal(p.B2, 0.0));
  CHECK(q.C1.approx_equal(p.C1, 0.0));
  CHECK(q.C2.approx_equal(p.C2, 0.0));
  CHECK(q.D12 == p.D12);
  CHECK(q.D21 == p.D21);
  CHECK(q.nw == p.nw);
  CHECK(q.ny == p.ny);
}
