#include "cbfmp/numerics.hpp"

#include <cmath>

namespace cbfmp {

namespace {

constexpr double kPivotTol = 1e-12;

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

Vector solve_linear(const Matrix& A, const Vector& b) {
  if (A.rows() != A.cols()) throw Error("solve_linear: matrix must be square");
  const int n = static_cast<int>(A.rows());
  if (b.size() != n) throw Error("solve_linear: dimension mismatch");

  Matrix U = A;
  Vector y = b;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double largest = std::abs(U(col, col));
    for (int row = col + 1; row < n; ++row) {
      const double mag = std::abs(U(row, col));
      if (mag > largest) {
        largest = mag;
        pivot = row;
      }
    }
    if (!(largest >= kPivotTol)) {
      throw SingularMatrix("solve_linear: pivot magnitude " + std::to_string(largest) +
                           " below 1e-12 at column " + std::to_string(col));
    }
    if (pivot != col) {
      U.row(pivot).swap(U.row(col));
      std::swap(y(pivot), y(col));
    }
    for (int row = col + 1; row < n; ++row) {
      const double factor = U(row, col) / U(col, col);
      if (factor == 0.0) continue;
      U.row(row).tail(n - col) -= factor * U.row(col).tail(n - col);
      y(row) -= factor * y(col);
    }
  }

  Vector x(n);
  for (int row = n - 1; row >= 0; --row) {
    double acc = y(row);
    for (int col = row + 1; col < n; ++col) acc -= U(row, col) * x(col);
    x(row) = acc / U(row, row);
  }
  if (!all_finite(x)) throw SingularMatrix("solve_linear: non-finite solution");
  return x;
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  if (A.rows() != A.cols() || Q.rows() != Q.cols() || A.rows() != Q.rows()) {
    throw Error("solve_lyapunov: dimension mismatch");
  }
  const int n = static_cast<int>(A.rows());

  // vec(A^T P + P A) = (I (x) A^T + A^T (x) I) vec(P), column-major vec.
  Matrix M = Matrix::Zero(n * n, n * n);
  for (int j = 0; j < n; ++j) {
    M.block(j * n, j * n, n, n) += A.transpose();
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        M(j * n + i, k * n + i) += A(k, j);
      }
    }
  }

  Vector q(n * n);
  for (int j = 0; j < n; ++j) q.segment(j * n, n) = -Q.col(j);

  const Vector p = solve_linear(M, q);
  Matrix P(n, n);
  for (int j = 0; j < n; ++j) P.col(j) = p.segment(j * n, n);
  P = 0.5 * (P + P.transpose().eval());
  return P;
}

Matrix solve_lyapunov(const Matrix& A) {
  return solve_lyapunov(A, Matrix::Identity(A.rows(), A.cols()));
}

bool routh_hurwitz(const PolyCoeffs& p) {
  const int d = p.degree();
  if (d < 1) return false;

  // Descending coefficients a0 = 1 (for s^d) down to a_d = c0.
  std::vector<double> a(d + 1);
  a[0] = 1.0;
  for (int i = 1; i <= d; ++i) {
    a[i] = p.c[d - i];
    if (!std::isfinite(a[i])) return false;
  }

  std::vector<double> top, bottom;
  for (int i = 0; i <= d; i += 2) top.push_back(a[i]);
  for (int i = 1; i <= d; i += 2) bottom.push_back(a[i]);

  if (!(top[0] > 0.0)) return false;
  for (int row = 0; row < d; ++row) {
    if (bottom.empty() || !(bottom[0] > 0.0) || !std::isfinite(bottom[0])) return false;
    std::vector<double> next;
    const std::size_t width = top.size() > 1 ? top.size() - 1 : bottom.size();
    for (std::size_t j = 0; j < width; ++j) {
      const double t = j + 1 < top.size() ? top[j + 1] : 0.0;
      const double b = j + 1 < bottom.size() ? bottom[j + 1] : 0.0;
      next.push_back((bottom[0] * t - top[0] * b) / bottom[0]);
    }
    if (next.empty()) next.push_back(0.0);
    top = std::move(bottom);
    bottom = std::move(next);
    if (row == d - 1) break;
  }
  return true;
}

PolyCoeffs char_poly(const Matrix& A) {
  if (A.rows() != A.cols()) throw Error("char_poly: matrix must be square");
  const int n = static_cast<int>(A.rows());

  // Faddeev-LeVerrier: M_1 = I, c_k = -tr(A M_k)/k, M_{k+1} = A M_k + c_k I.
  std::vector<double> desc(n);  // c_1..c_n for s^{n-1}..s^0
  Matrix Mk = Matrix::Identity(n, n);
  for (int k = 1; k <= n; ++k) {
    const Matrix AM = A * Mk;
    desc[k - 1] = -AM.trace() / static_cast<double>(k);
    if (k < n) Mk = AM + desc[k - 1] * Matrix::Identity(n, n);
  }

  PolyCoeffs p;
  p.c.resize(n);
  for (int i = 0; i < n; ++i) p.c[i] = desc[n - 1 - i];
  return p;
}

Matrix place_poles(const Matrix& A, const Vector& b, const std::vector<double>& poles) {
  const int n = static_cast<int>(A.rows());
  if (static_cast<int>(poles.size()) != n) {
    throw Error("place_poles: need one pole per state");
  }

  Matrix ctrl(n, n);
  Vector col = b;
  for (int k = 0; k < n; ++k) {
    ctrl.col(k) = col;
    col = A * col;
  }

  // Desired monic polynomial prod (s - p_i), ascending coefficients.
  std::vector<double> coeff{1.0};
  for (double pole : poles) {
    std::vector<double> next(coeff.size() + 1, 0.0);
    for (std::size_t i = 0; i < coeff.size(); ++i) {
      next[i] += coeff[i] * (-pole);
      next[i + 1] += coeff[i];
    }
    coeff = std::move(next);
  }

  Matrix pA = Matrix::Zero(n, n);
  Matrix Apow = Matrix::Identity(n, n);
  for (int k = 0; k <= n; ++k) {
    pA += coeff[k] * Apow;
    if (k < n) Apow = (Apow * A).eval();
  }

  Vector en = Vector::Zero(n);
  en(n - 1) = 1.0;
  Vector w;
  try {
    w = solve_linear(ctrl.transpose(), en);  // Ackermann row
  } catch (const SingularMatrix&) {
    throw SingularMatrix("place_poles: pair (A, b) is not controllable");
  }
  return w.transpose() * pA;
}

Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                const Matrix& K0) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (K0.rows() != m || K0.cols() != n) throw Error("lqr_gain: K0 must be m x n");

  if (!routh_hurwitz(char_poly(A - B * K0))) {
    throw NotStabilizing("lqr_gain: A - B K0 is not Hurwitz");
  }

  Matrix K = K0;
  for (int iter = 0; iter < 100; ++iter) {
    const Matrix Acl = A - B * K;
    const Matrix P = solve_lyapunov(Acl, Q + K.transpose() * R * K);

    // K_{i+1} = R^{-1} B^T P, column by column.
    const Matrix rhs = B.transpose() * P;
    Matrix Knext(m, n);
    for (int j = 0; j < n; ++j) Knext.col(j) = solve_linear(R, rhs.col(j));

    const double delta = (Knext - K).cwiseAbs().maxCoeff();
    K = Knext;
    if (delta <= 1e-9) return K;
  }
  throw NoConvergence("lqr_gain: no convergence within 100 iterations");
}

Vector rk4_step(const VectorField& f, const Vector& x, double t, double dt) {
  if (!(dt > 0.0)) throw Error("rk4_step: dt must be positive");

  const Vector k1 = f(x, t);
  if (!all_finite(k1)) throw NonFiniteState("rk4_step: stage 1 not finite");
  const Vector k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt);
  if (!all_finite(k2)) throw NonFiniteState("rk4_step: stage 2 not finite");
  const Vector k3 = f(x + 0.5 * dt * k2, t + 0.5 * dt);
  if (!all_finite(k3)) throw NonFiniteState("rk4_step: stage 3 not finite");
  const Vector k4 = f(x + dt * k3, t + dt);
  if (!all_finite(k4)) throw NonFiniteState("rk4_step: stage 4 not finite");

  Vector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!all_finite(next)) throw NonFiniteState("rk4_step: non-finite result");
  return next;
}

}  // namespace cbfmp
