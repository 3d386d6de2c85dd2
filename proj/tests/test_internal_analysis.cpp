#include <doctest.h>

#include <cmath>

#include "cbfmp/internal_analysis.hpp"
#include "cbfmp/scenarios.hpp"
#include "cbfmp/verification.hpp"

using namespace cbfmp;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Matrix plant_matrix(double a) {
  Matrix A(3, 3);
  A << 0, 1, 0, 0, 0, 0, 3, 1, a;
  return A;
}

}  // namespace

TEST_CASE("linear_relative_degree on the worked plants") {
  const Matrix A = plant_matrix(-1.0);
  Vector b(3);
  b << 0, 1, 0;
  RowVector c(3);
  c << 1, 0, 0;
  CHECK(linear_relative_degree(A, b, c) == 2);

  // Output aligned with the input channel has relative degree one.
  RowVector c2(3);
  c2 << 0, 1, 0;
  CHECK(linear_relative_degree(A, b, c2) == 1);

  // Two-input variant: c B = [0, 0] but c A B = [1, 0].
  Matrix B2(3, 2);
  B2 << 0, 0, 1, 0, 0, 1;
  CHECK(linear_relative_degree(plant_matrix(1.0), B2, c) == 2);

  // No relative degree at all: the output never sees the input.
  RowVector c3(3);
  c3 << 0, 0, 1;
  CHECK_THROWS_AS(linear_relative_degree(Matrix::Zero(3, 3), b, c3), NoRelativeDegree);
}

TEST_CASE("extract_internal_linear recovers eta = x3 for the worked plant") {
  const GammaSpec spec = build_gamma_spec(vec({2, 3}));
  Vector b(3);
  b << 0, 1, 0;
  RowVector c(3);
  c << 1, 0, 0;

  for (double a : {-1.0, 1.0}) {
    const ZeroDynamicsLinear zd = extract_internal_linear(plant_matrix(a), b, c, spec);
    CHECK(zd.N.isApprox(RowVector(vec({0, 0, 1}).transpose()), 1e-12));
    CHECK(zd.A_eta(0, 0) == doctest::Approx(a).epsilon(1e-10));
    CHECK(zd.B_eta.isApprox(RowVector(vec({1, 1}).transpose()), 1e-10));
    CHECK(zd.BGamma(0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK((zd.N * b).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(zd.min_phase ==
          (a < 0 ? MinPhaseVerdict::MinimumPhase : MinPhaseVerdict::NonMinimumPhase));
  }
}

TEST_CASE("extract_internal_linear recovers a known coupling block") {
  // Plant already in (xi, eta) block form: eta_dot = -2 eta + [4, 7] xi.
  Matrix A(3, 3);
  A << 0, 1, 0, 0, 0, 0, 4, 7, -2;
  Vector b(3);
  b << 0, 1, 0;
  RowVector c(3);
  c << 1, 0, 0;
  const GammaSpec spec = build_gamma_spec(vec({1, 2}));  // T^{-1} = [[1,0],[-1,1]]
  const ZeroDynamicsLinear zd = extract_internal_linear(A, b, c, spec);
  CHECK(zd.A_eta(0, 0) == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(zd.B_eta(0, 0) == doctest::Approx(-3.0).epsilon(1e-10));  // [4,7] T^{-1}
  CHECK(zd.B_eta(0, 1) == doctest::Approx(7.0).epsilon(1e-10));
}

TEST_CASE("fixed_mu_equilibrium") {
  const GammaSpec spec = build_gamma_spec(vec({2, 3}));
  Vector b(3);
  b << 0, 1, 0;
  RowVector c(3);
  c << 1, 0, 0;

  const ZeroDynamicsLinear stable = extract_internal_linear(plant_matrix(-1.0), b, c, spec);
  CHECK(fixed_mu_equilibrium(stable, 7.5)(0) == doctest::Approx(3.75).epsilon(1e-10));
  CHECK(fixed_mu_equilibrium(stable, 0.0)(0) == doctest::Approx(0.0));

  const ZeroDynamicsLinear faster = extract_internal_linear(plant_matrix(-2.0), b, c, spec);
  const Vector eta_e = fixed_mu_equilibrium(faster, 4.0);
  CHECK(eta_e(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK((faster.A_eta * eta_e + faster.BGamma * 4.0).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("local_min_phase_jacobian") {
  // Linear field reproduces its own matrix.
  Matrix A_eta(2, 2);
  A_eta << -1, 0.5, 0.2, -3;
  Matrix B_eta(2, 2);
  B_eta << 1, 0, 0, 1;
  const InternalField linear = [&](const Vector& eta, const Vector& phi) {
    return (A_eta * eta + B_eta * phi).eval();
  };
  const JacobianVerdict lv = local_min_phase_jacobian(linear, vec({0.3, -0.2}), vec({0, 0}));
  CHECK((lv.jacobian - A_eta).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK(lv.exponentially_stable);

  // Quadratic field at the origin: zero Jacobian, no exponential verdict.
  const InternalField quad = [](const Vector& eta, const Vector&) {
    return (eta.array() * eta.array()).matrix().eval();
  };
  const JacobianVerdict qv = local_min_phase_jacobian(quad, vec({0.0}), vec({0.0}));
  CHECK(std::abs(qv.jacobian(0, 0)) <= 1e-6);
  CHECK_FALSE(qv.exponentially_stable);
}

TEST_CASE("cart-pole feedback zero dynamics has the expected interior Jacobian") {
  const double b_drag = 4.0;
  const double theta_max = M_PI / 3.0;
  const InternalField feedback_zero = [=](const Vector& eta, const Vector&) {
    const double theta = theta_d(eta(1), theta_max);
    Vector d(2);
    d(0) = (-b_drag * eta(0) + eta(1)) / std::cos(theta);
    d(1) = -std::clamp(eta(1), -std::sin(theta_max), std::sin(theta_max));
    return d;
  };

  // On the line b eta1 = eta2 the angle-dependence drops out of the
  // eta2-derivative of the first row.
  const double eta2 = 0.3;
  const Vector eta_e = vec({eta2 / b_drag, eta2});
  const JacobianVerdict jv = local_min_phase_jacobian(feedback_zero, eta_e, vec({0, 0}));
  const double cos_d = std::cos(theta_d(eta2, theta_max));
  Matrix expected(2, 2);
  expected << -b_drag / cos_d, 1.0 / cos_d, 0.0, -1.0;
  CHECK((jv.jacobian - expected).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK(jv.exponentially_stable);
}

TEST_CASE("multi_input_obstruction") {
  // Two-input linear plant: witness is the column the constraint cannot see.
  Matrix B2(3, 2);
  B2 << 0, 0, 1, 0, 0, 1;
  RowVector lglfh(2);
  lglfh << 1, 0;
  const auto w = multi_input_obstruction(lglfh, B2);
  REQUIRE(w.has_value());
  CHECK(w->c.isApprox(vec({0, 1}), 1e-12));
  CHECK(w->q.isApprox(vec({0, 0, 1}), 1e-12));

  // The witness is annihilated by the output-chain rows dxi = [c; cA].
  Matrix dxi(2, 3);
  dxi << 1, 0, 0, 0, 1, 0;
  CHECK((dxi * w->q).cwiseAbs().maxCoeff() <= 1e-12);

  // Single input: no obstruction.
  Matrix b1(3, 1);
  b1 << 0, 1, 0;
  RowVector row1(1);
  row1 << 1;
  CHECK_FALSE(multi_input_obstruction(row1, b1).has_value());

  // Symmetric row: the orthogonal complement in 2d.
  RowVector sym(2);
  sym << 1, 1;
  const auto ws = multi_input_obstruction(sym, Matrix::Identity(2, 2));
  REQUIRE(ws.has_value());
  CHECK(std::abs(ws->c.dot(vec({1, 1}))) <= 1e-12);
  CHECK(ws->c.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ws->c(0) * ws->c(1) < 0.0);  // proportional to [1, -1]/sqrt(2)

  // Dependent input columns are rejected.
  Matrix dep(3, 2);
  dep << 1, 2, 0, 0, 1, 2;
  CHECK_THROWS_AS(multi_input_obstruction(sym, dep), DependentColumns);
}

TEST_CASE("gamma_min_sufficiency") {
  MinPhaseCertificate cert;
  cert.alpha1 = 1.0;
  cert.alpha2 = 1.0;
  cert.alpha3 = 2.0;
  cert.alpha4 = 2.0;
  cert.l_phi = 1.0;
  cert.gamma_min = 10.0;
  CHECK(gamma_min_sufficiency(cert) == SufficiencyVerdict::Pass);  // 2 > 1

  cert.l_phi = 2.0;
  cert.alpha4 = 4.0;  // boundary: 4 <= (2*2/2)^2
  CHECK(gamma_min_sufficiency(cert) == SufficiencyVerdict::FailAlpha);

  cert.alpha4 = -1.0;
  CHECK_THROWS_AS(gamma_min_sufficiency(cert), InvalidCertificate);
}

TEST_CASE("minimum-phase verdict matches the constructed oracle on random plants") {
  const auto res = verify::suite_min_phase_equivalence(4242, 60);
  CHECK_MESSAGE(res.pass, res.detail);
}

TEST_CASE("fixed-mu tracking converges to the predicted equilibrium pair") {
  // Simulate the stable plant while pinning mu at 7.5 from a perturbed start
  // inside S_phi; (phi, eta) must approach (Gamma mu_e, eta_e) with a
  // positive exponential envelope rate.
  LinearSiConfig cfg;
  cfg.a = -1.0;
  cfg.wiring = FilterWiring::KappaPs;
  cfg.mu_e = 7.5;
  cfg.x0 = {1.0, 0.0, 0.0};
  cfg.sim.horizon = 12.0;
  const Scenario s = make_linear_si(cfg);
  const Trajectory traj = s.run();

  const Vector phi_e = equilibria_line_point(s.gamma, 7.5);
  const double eta_e = 3.75;

  std::vector<double> log_err, times;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double err = std::hypot((traj.phi[i] - phi_e).norm(), traj.eta[i](0) - eta_e);
    if (err > 1e-12) {
      log_err.push_back(std::log(err));
      times.push_back(traj.times[i]);
    }
  }
  REQUIRE(log_err.size() > 100);
  // Least-squares slope of log error vs time.
  double tm = 0, lm = 0;
  for (std::size_t i = 0; i < log_err.size(); ++i) {
    tm += times[i];
    lm += log_err[i];
  }
  tm /= static_cast<double>(times.size());
  lm /= static_cast<double>(log_err.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < log_err.size(); ++i) {
    num += (times[i] - tm) * (log_err[i] - lm);
    den += (times[i] - tm) * (times[i] - tm);
  }
  const double rate = -num / den;
  CHECK(rate > 0.0);
  CHECK((traj.phi.back() - phi_e).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(traj.eta.back()(0) == doctest::Approx(eta_e).epsilon(1e-3));
}
