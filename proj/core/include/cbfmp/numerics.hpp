#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "cbfmp/errors.hpp"

namespace cbfmp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Coefficients c0..c_{d-1} of a monic polynomial
/// s^d + c_{d-1} s^{d-1} + ... + c1 s + c0, stored in ascending order.
/// The leading coefficient 1 is implicit.
struct PolyCoeffs {
  std::vector<double> c;

  int degree() const { return static_cast<int>(c.size()); }
};

/// Solves A x = b by Gaussian elimination with partial pivoting.
/// Throws SingularMatrix when a pivot magnitude falls below 1e-12.
Vector solve_linear(const Matrix& A, const Vector& b);

/// Solves the continuous-time Lyapunov equation A^T P + P A = -Q for P
/// by vectorizing to an n^2 x n^2 linear system. A must be Hurwitz for the
/// result to be positive definite; a non-Hurwitz A may surface as
/// SingularMatrix when eigenvalue pairs sum to zero.
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

/// A^T P + P A = -I convenience overload.
Matrix solve_lyapunov(const Matrix& A);

/// True iff every root of the monic polynomial has strictly negative real
/// part, decided by the Routh array. Any zero or non-finite first-column
/// entry yields false (marginal cases are treated as failures).
bool routh_hurwitz(const PolyCoeffs& p);

/// Monic characteristic polynomial of a square matrix via the
/// Faddeev-LeVerrier recursion.
PolyCoeffs char_poly(const Matrix& A);

/// Single-input pole placement via Ackermann's formula. Throws
/// SingularMatrix when (A, b) is not controllable. Used to seed lqr_gain.
Matrix place_poles(const Matrix& A, const Vector& b, const std::vector<double>& poles);

/// Continuous-time LQR gain by Kleinman-Newton iteration starting from a
/// stabilizing gain K0. Each step performs one Lyapunov solve. Iterates
/// until ||K_{i+1} - K_i||_inf <= 1e-9 or 100 iterations.
/// Throws NotStabilizing if A - B K0 is not Hurwitz and NoConvergence after
/// 100 iterations.
Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                const Matrix& K0);

using VectorField = std::function<Vector(const Vector& x, double t)>;

/// One classical fourth-order Runge-Kutta step. Throws NonFiniteState if any
/// stage evaluates to non-finite values.
Vector rk4_step(const VectorField& f, const Vector& x, double t, double dt);

}  // namespace cbfmp
