#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "cbfmp/numerics.hpp"

using namespace cbfmp;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("solve_linear handles identity and diagonal systems") {
  CHECK(solve_linear(Matrix::Identity(2, 2), vec({3, 4})).isApprox(vec({3, 4}), 1e-14));

  Matrix D(2, 2);
  D << 2, 0, 0, 4;
  CHECK(solve_linear(D, vec({2, 8})).isApprox(vec({1, 2}), 1e-14));
}

TEST_CASE("solve_linear recovers a known solution of a well-conditioned 5x5 system") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix A(5, 5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) A(i, j) = dist(rng);
    A(i, i) += 6.0;  // diagonal dominance keeps the system well conditioned
  }
  Vector x_true(5);
  for (int i = 0; i < 5; ++i) x_true(i) = dist(rng);
  const Vector x = solve_linear(A, A * x_true);
  CHECK((x - x_true).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((A * x - A * x_true).cwiseAbs().maxCoeff() <=
        1e-10 * (1.0 + (A * x_true).cwiseAbs().maxCoeff()));
}

TEST_CASE("solve_linear rejects singular matrices") {
  Matrix S(2, 2);
  S << 1, 2, 2, 4;
  CHECK_THROWS_AS(solve_linear(S, vec({1, 1})), SingularMatrix);
}

TEST_CASE("solve_lyapunov scalar and diagonal cases") {
  Matrix A(1, 1);
  A << -1;
  CHECK(solve_lyapunov(A)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

  Matrix D(2, 2);
  D << -1, 0, 0, -2;
  const Matrix P = solve_lyapunov(D);
  CHECK(P(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(P(1, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::abs(P(0, 1)) < 1e-14);
}

TEST_CASE("solve_lyapunov matches the hand-solved 2x2 bidiagonal system") {
  // A = [[-2, 1], [0, -3]]: the three scalar equations of the symmetric
  // unknown give p11 = 1/4, p12 = p11/5 = 1/20, p22 = (2 p12 + 1)/6 = 11/60.
  Matrix A(2, 2);
  A << -2, 1, 0, -3;
  const Matrix P = solve_lyapunov(A);
  CHECK(P(0, 0) == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(P(0, 1) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(P(1, 0) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(P(1, 1) == doctest::Approx(11.0 / 60.0).epsilon(1e-10));

  const Matrix residual = A.transpose() * P + P * A + Matrix::Identity(2, 2);
  CHECK(residual.cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(P(0, 0) > 0.0);
  CHECK(P.determinant() > 0.0);
}

TEST_CASE("solve_lyapunov output is symmetric positive definite for Hurwitz inputs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> rate(0.1, 20.0);
  std::uniform_int_distribution<int> dim(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = dim(rng);
    Matrix A = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      A(i, i) = -rate(rng);
      if (i + 1 < n) A(i, i + 1) = 1.0;
    }
    REQUIRE(routh_hurwitz(char_poly(A)));
    const Matrix P = solve_lyapunov(A);
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    for (int k = 1; k <= n; ++k) CHECK(P.topLeftCorner(k, k).determinant() > 0.0);
  }
}

TEST_CASE("solve_lyapunov rejects marginal inputs whose eigenvalues pair to zero") {
  Matrix A(2, 2);
  A << 0, 1, -1, 0;  // eigenvalues +-i
  CHECK_THROWS_AS(solve_lyapunov(A), SingularMatrix);
}

TEST_CASE("routh_hurwitz on pinned polynomials") {
  CHECK(routh_hurwitz(PolyCoeffs{{1.0}}));         // s + 1
  CHECK(routh_hurwitz(PolyCoeffs{{6.0, 5.0}}));    // s^2 + 5s + 6, roots -2, -3
  CHECK_FALSE(routh_hurwitz(PolyCoeffs{{-1.0}}));  // s - 1
  CHECK_FALSE(routh_hurwitz(PolyCoeffs{{1.0, 0.0}}));  // marginal s^2 + 1
  CHECK_FALSE(routh_hurwitz(PolyCoeffs{{}}));          // degenerate
}

TEST_CASE("routh_hurwitz agrees with companion-matrix eigenvalues on random polynomials") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> coeff(-4.0, 4.0);
  std::uniform_int_distribution<int> deg(1, 4);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = deg(rng);
    PolyCoeffs p;
    for (int i = 0; i < d; ++i) p.c.push_back(coeff(rng));

    Matrix companion = Matrix::Zero(d, d);
    for (int i = 0; i + 1 < d; ++i) companion(i, i + 1) = 1.0;
    for (int j = 0; j < d; ++j) companion(d - 1, j) = -p.c[j];
    Eigen::EigenSolver<Matrix> eig(companion);
    double max_real = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) max_real = std::max(max_real, eig.eigenvalues()(i).real());
    if (std::abs(max_real) < 1e-7) continue;  // too close to marginal to compare

    CHECK(routh_hurwitz(p) == (max_real < 0.0));
  }
}

TEST_CASE("char_poly matches hand expansions") {
  Matrix A(2, 2);
  A << 0, 1, -6, -5;
  const PolyCoeffs p = char_poly(A);  // det(sI - A) = s^2 + 5s + 6
  REQUIRE(p.degree() == 2);
  CHECK(p.c[0] == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(p.c[1] == doctest::Approx(5.0).epsilon(1e-12));

  Matrix D = Matrix::Zero(3, 3);
  D.diagonal() << -1, -2, -3;
  const PolyCoeffs q = char_poly(D);  // (s+1)(s+2)(s+3) = s^3 + 6s^2 + 11s + 6
  CHECK(q.c[0] == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(q.c[1] == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(q.c[2] == doctest::Approx(6.0).epsilon(1e-12));

  Matrix one(1, 1);
  one << 1.7;
  CHECK(char_poly(one).c[0] == doctest::Approx(-1.7).epsilon(1e-12));  // s - a
}

TEST_CASE("place_poles assigns the requested spectrum") {
  Matrix A(3, 3);
  A << 0, 1, 0, 0, 0, 0, 3, 1, -1;
  Vector b(3);
  b << 0, 1, 0;
  const Matrix K0 = place_poles(A, b, {-1.0, -2.0, -3.0});
  const PolyCoeffs p = char_poly(A - b * K0);
  CHECK(p.c[0] == doctest::Approx(6.0).epsilon(1e-9));
  CHECK(p.c[1] == doctest::Approx(11.0).epsilon(1e-9));
  CHECK(p.c[2] == doctest::Approx(6.0).epsilon(1e-9));

  // Uncontrollable pair.
  Vector b0 = Vector::Zero(3);
  CHECK_THROWS_AS(place_poles(A, b0, {-1.0, -2.0, -3.0}), SingularMatrix);
}

TEST_CASE("lqr_gain solves the scalar Riccati equation") {
  Matrix A(1, 1), B(1, 1), Q(1, 1), R(1, 1), K0(1, 1);
  A << 0;
  B << 1;
  Q << 1;
  R << 1;
  K0 << 1;
  // p^2 = 1 so K = p = 1.
  const Matrix K = lqr_gain(A, B, Q, R, K0);
  CHECK(K(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("lqr_gain rejects a non-stabilizing start") {
  Matrix A(1, 1), B(1, 1), Q(1, 1), R(1, 1), K0(1, 1);
  A << 1;
  B << 0;  // uncontrollable and unstable: no K0 can pass the precheck
  Q << 1;
  R << 1;
  K0 << 5;
  CHECK_THROWS_AS(lqr_gain(A, B, Q, R, K0), NotStabilizing);
}

TEST_CASE("lqr_gain stabilizes the 3-state plant") {
  Matrix A(3, 3);
  A << 0, 1, 0, 0, 0, 0, 3, 1, -1;
  Vector b(3);
  b << 0, 1, 0;
  const Matrix K0 = place_poles(A, b, {-1.0, -2.0, -3.0});
  const Matrix K =
      lqr_gain(A, b, Matrix::Identity(3, 3), Matrix::Identity(1, 1), K0);
  CHECK(routh_hurwitz(char_poly(A - b * K)));

  // Fixed point of the Riccati recursion: one more sweep barely moves K.
  const Matrix K2 = lqr_gain(A, b, Matrix::Identity(3, 3), Matrix::Identity(1, 1), K);
  CHECK((K2 - K).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("rk4_step basics") {
  const auto zero_field = [](const Vector&, double) { return Vector::Zero(2); };
  CHECK(rk4_step(zero_field, vec({1, 2}), 0.0, 0.1).isApprox(vec({1, 2}), 1e-15));

  const auto decay = [](const Vector& x, double) { return (-x).eval(); };
  const double next = rk4_step(decay, vec({1}), 0.0, 0.1)(0);
  CHECK(next == doctest::Approx(0.9048375).epsilon(1e-12));
  CHECK(std::abs(next - std::exp(-0.1)) < 1e-7);

  const auto constant = [](const Vector&, double) { return vec({1}); };
  CHECK(rk4_step(constant, vec({0}), 0.0, 0.5)(0) == doctest::Approx(0.5).epsilon(1e-15));

  const auto blows = [](const Vector&, double) {
    return vec({std::numeric_limits<double>::quiet_NaN()});
  };
  CHECK_THROWS_AS(rk4_step(blows, vec({0}), 0.0, 0.1), NonFiniteState);
}

TEST_CASE("rk4_step single-step error drops by at least 2^4 when dt halves") {
  const double lambda = -1.3;
  const auto field = [lambda](const Vector& x, double) { return (lambda * x).eval(); };
  double dt = 0.2;
  double prev_err = 0.0;
  for (int level = 0; level < 4; ++level) {
    const double err =
        std::abs(rk4_step(field, vec({1}), 0.0, dt)(0) - std::exp(lambda * dt));
    if (level > 0) CHECK(prev_err / err >= 16.0 * 0.9);
    prev_err = err;
    dt *= 0.5;
  }
}
