#include "cbfmp/internal_analysis.hpp"

#include <cmath>

namespace cbfmp {

namespace {

Matrix invert_square(const Matrix& M) {
  const int n = static_cast<int>(M.rows());
  Matrix inv(n, n);
  for (int j = 0; j < n; ++j) {
    Vector e = Vector::Zero(n);
    e(j) = 1.0;
    inv.col(j) = solve_linear(M, e);
  }
  return inv;
}

int rank_with_tol(const Matrix& M, double tol) {
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol * sv(0)) ++rank;
  }
  return sv.size() == 0 ? 0 : rank;
}

}  // namespace

int linear_relative_degree(const Matrix& A, const Matrix& B, const RowVector& c) {
  const int n = static_cast<int>(A.rows());
  RowVector row = c;
  for (int k = 0; k < n; ++k) {
    if ((row * B).cwiseAbs().maxCoeff() > 1e-9) return k + 1;
    row = row * A;
  }
  throw NoRelativeDegree("linear_relative_degree: c A^k B vanishes for all k < n");
}

OutputChain make_linear_output_chain(const Matrix& A, const Matrix& B, const RowVector& c) {
  const int r = linear_relative_degree(A, B, c);

  std::vector<RowVector> rows(r + 1);
  rows[0] = c;
  for (int k = 1; k <= r; ++k) rows[k] = rows[k - 1] * A;
  const RowVector input_row = rows[r - 1] * B;

  OutputChain chain;
  chain.r = r;
  chain.lfh.reserve(r + 1);
  for (int k = 0; k <= r; ++k) {
    chain.lfh.push_back([row = rows[k]](const Vector& x) { return row.dot(x); });
  }
  chain.h = chain.lfh[0];
  chain.lglfh = [input_row](const Vector&) { return input_row; };
  return chain;
}

ZeroDynamicsLinear extract_internal_linear(const Matrix& A, const Vector& b,
                                           const RowVector& c, const GammaSpec& spec) {
  const int n = static_cast<int>(A.rows());
  const int r = linear_relative_degree(A, b, c);
  if (r != spec.r) throw Error("extract_internal_linear: gamma spec has wrong r");
  if (r >= n) {
    throw SingularCoordinates("extract_internal_linear: no internal coordinates (r = n)");
  }

  Matrix dxi(r, n);
  RowVector row = c;
  for (int k = 0; k < r; ++k) {
    dxi.row(k) = row;
    row = row * A;
  }

  const double b_scale = 1.0 + b.cwiseAbs().maxCoeff();
  const double rank_tol = 1e-9;

  // Candidate rows annihilating b: unit coordinate directions first, then
  // the orthogonal complement of b.
  std::vector<RowVector> candidates;
  for (int j = 0; j < n; ++j) {
    if (std::abs(b(j)) <= 1e-12 * b_scale) {
      RowVector e = RowVector::Zero(n);
      e(j) = 1.0;
      candidates.push_back(e);
    }
  }
  {
    Eigen::FullPivHouseholderQR<Matrix> qr(b);
    const Matrix Qfull = qr.matrixQ();
    for (int j = 1; j < n; ++j) candidates.push_back(Qfull.col(j).transpose());
  }

  Matrix N(n - r, n);
  int accepted = 0;
  Matrix stacked = dxi;
  for (const RowVector& cand : candidates) {
    if (accepted == n - r) break;
    Matrix trial(stacked.rows() + 1, n);
    trial.topRows(stacked.rows()) = stacked;
    trial.bottomRows(1) = cand;
    if (rank_with_tol(trial, rank_tol) == static_cast<int>(trial.rows())) {
      N.row(accepted++) = cand;
      stacked = trial;
    }
  }
  if (accepted != n - r) {
    throw SingularCoordinates(
        "extract_internal_linear: could not complete [dxi; N] to a nonsingular map");
  }

  Matrix M(n, n);
  M.topRows(r) = dxi;
  M.bottomRows(n - r) = N;
  Matrix M_inv;
  try {
    M_inv = invert_square(M);
  } catch (const SingularMatrix&) {
    throw SingularCoordinates("extract_internal_linear: [dxi; N] is singular");
  }

  // eta_dot = N A x = [E_xi | A_eta] [xi; eta], then xi = T^{-1} phi.
  const Matrix W = N * A * M_inv;
  ZeroDynamicsLinear zd;
  zd.N = N;
  zd.A_eta = W.rightCols(n - r);
  zd.B_eta = W.leftCols(r) * invert_square(spec.T);
  zd.BGamma = zd.B_eta * spec.Gamma;
  zd.min_phase = routh_hurwitz(char_poly(zd.A_eta)) ? MinPhaseVerdict::MinimumPhase
                                                    : MinPhaseVerdict::NonMinimumPhase;
  return zd;
}

Vector fixed_mu_equilibrium(const ZeroDynamicsLinear& zd, double mu_e) {
  if (mu_e < 0.0) throw NegativeMu("fixed_mu_equilibrium: mu_e must be nonnegative");
  return -solve_linear(zd.A_eta, zd.BGamma * mu_e);
}

JacobianVerdict local_min_phase_jacobian(const InternalField& q_cbf, const Vector& eta_e,
                                         const Vector& phi_e) {
  const int n = static_cast<int>(eta_e.size());
  JacobianVerdict out;
  out.jacobian = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const double step = 1e-5 * std::max(1.0, std::abs(eta_e(j)));
    Vector hi = eta_e, lo = eta_e;
    hi(j) += step;
    lo(j) -= step;
    const Vector diff = (q_cbf(hi, phi_e) - q_cbf(lo, phi_e)) / (2.0 * step);
    if (!diff.allFinite()) {
      throw NonFinite("local_min_phase_jacobian: field not finite near the equilibrium");
    }
    out.jacobian.col(j) = diff;
  }
  out.exponentially_stable = routh_hurwitz(char_poly(out.jacobian));
  return out;
}

std::optional<ObstructionWitness> multi_input_obstruction(const RowVector& lglfh_row,
                                                          const Matrix& g_cols) {
  const int m = static_cast<int>(g_cols.cols());
  if (static_cast<int>(lglfh_row.size()) != m) {
    throw Error("multi_input_obstruction: row length must match input count");
  }
  if (m <= 1) return std::nullopt;

  if (rank_with_tol(g_cols, 1e-9) < m) {
    throw DependentColumns("multi_input_obstruction: input columns are dependent");
  }

  Vector c;
  const double norm2 = lglfh_row.squaredNorm();
  if (norm2 < 1e-24) {
    c = Vector::Zero(m);
    c(0) = 1.0;
  } else {
    int j = 0;
    for (int i = 1; i < m; ++i) {
      if (std::abs(lglfh_row(i)) < std::abs(lglfh_row(j))) j = i;
    }
    c = Vector::Zero(m);
    c(j) = 1.0;
    c -= (lglfh_row(j) / norm2) * lglfh_row.transpose();
    c.normalize();
  }

  ObstructionWitness w;
  w.c = c;
  w.q = g_cols * c;
  return w;
}

SufficiencyVerdict gamma_min_sufficiency(const MinPhaseCertificate& cert) {
  const double entries[] = {cert.alpha1, cert.alpha2, cert.alpha3,
                            cert.alpha4, cert.l_phi,  cert.gamma_min};
  for (double v : entries) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidCertificate("gamma_min_sufficiency: entries must be positive");
    }
  }
  const double threshold = 0.25 * cert.alpha3 * cert.alpha3 * cert.l_phi * cert.l_phi;
  return cert.alpha4 > threshold ? SufficiencyVerdict::Pass : SufficiencyVerdict::FailAlpha;
}

}  // namespace cbfmp
