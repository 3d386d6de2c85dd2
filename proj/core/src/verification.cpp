#include "cbfmp/verification.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "cbfmp/filters.hpp"
#include "cbfmp/internal_analysis.hpp"

namespace cbfmp::verify {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool hooked_hurwitz(const PolyCoeffs& p, const Hooks& hooks) {
  const bool verdict = routh_hurwitz(p);
  return hooks.negate_routh ? !verdict : verdict;
}

Matrix random_orthogonal(Rng& rng, int n) {
  Matrix G(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) G(i, j) = uniform(rng, -1.0, 1.0);
  }
  Eigen::HouseholderQR<Matrix> qr(G);
  return qr.householderQ();
}

// Well-conditioned random similarity transform (singular values in [0.5, 2]).
Matrix random_similarity(Rng& rng, int n) {
  Matrix D = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) D(i, i) = uniform(rng, 0.5, 2.0);
  return random_orthogonal(rng, n) * D * random_orthogonal(rng, n);
}

// Square matrix with prescribed eigenvalues: orthogonal conjugation of an
// upper-triangular matrix carrying them on the diagonal.
Matrix matrix_with_spectrum(Rng& rng, const std::vector<double>& eigs) {
  const int n = static_cast<int>(eigs.size());
  Matrix U = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    U(i, i) = eigs[i];
    for (int j = i + 1; j < n; ++j) U(i, j) = uniform(rng, -1.0, 1.0);
  }
  const Matrix Q = random_orthogonal(rng, n);
  return Q * U * Q.transpose();
}

}  // namespace

SuiteResult suite_gamma_norm_bound(std::uint64_t seed, int cases, const Hooks& hooks) {
  SuiteResult res{"gamma_norm_bound", true, cases, ""};
  Rng rng(seed ^ 0x67616d6dull);
  for (int i = 0; i < cases; ++i) {
    const int r = uniform_int(rng, 1, 4);
    Vector gammas(r);
    for (int j = 0; j < r; ++j) gammas(j) = uniform(rng, std::sqrt(2.0), 20.0);
    const GammaSpec spec = build_gamma_spec(gammas);
    if (!hooked_hurwitz(spec.k, hooks)) {
      res.pass = false;
      res.detail = "case " + std::to_string(i) + ": constraint polynomial not Hurwitz";
      return res;
    }
    const double bound = std::sqrt(2.0) / spec.gamma_min();
    if (spec.Gamma.norm() > bound + 1e-12) {
      std::ostringstream os;
      os << "case " << i << ": ||Gamma|| = " << spec.Gamma.norm() << " exceeds "
         << bound << " for gammas " << gammas.transpose();
      res.pass = false;
      res.detail = os.str();
      return res;
    }
  }
  return res;
}

SuiteResult suite_lyapunov_residual(std::uint64_t seed, int cases, const Hooks& hooks) {
  SuiteResult res{"lyapunov_residual", true, cases, ""};
  Rng rng(seed ^ 0x6c796170ull);
  for (int i = 0; i < cases; ++i) {
    const int r = uniform_int(rng, 2, 4);
    Vector gammas(r);
    for (int j = 0; j < r; ++j) gammas(j) = uniform(rng, 0.1, 20.0);
    const GammaSpec spec = build_gamma_spec(gammas);
    if (!hooked_hurwitz(char_poly(spec.A_gamma), hooks)) {
      res.pass = false;
      res.detail = "case " + std::to_string(i) + ": A_gamma reported non-Hurwitz";
      return res;
    }
    const Matrix P = solve_lyapunov(spec.A_gamma);
    const Matrix residual = spec.A_gamma.transpose() * P + P * spec.A_gamma +
                            Matrix::Identity(r, r);
    const double res_norm = residual.cwiseAbs().maxCoeff();
    const double asym = (P - P.transpose()).cwiseAbs().maxCoeff();
    bool minors_ok = true;
    for (int k = 1; k <= r; ++k) {
      if (P.topLeftCorner(k, k).determinant() <= 0.0) minors_ok = false;
    }
    if (res_norm > 1e-8 || asym > 1e-10 || !minors_ok) {
      std::ostringstream os;
      os << "case " << i << ": residual " << res_norm << ", asymmetry " << asym
         << ", positive definite " << (minors_ok ? "yes" : "no");
      res.pass = false;
      res.detail = os.str();
      return res;
    }
  }
  return res;
}

namespace {

struct QpInstance {
  Vector u_ref;
  std::vector<AffineConstraint> rows;
};

QpInstance random_feasible_qp(Rng& rng) {
  const int m = uniform_int(rng, 1, 4);
  const int n_eq = uniform_int(rng, 0, std::min(2, m - 1));
  const int n_ineq = uniform_int(rng, 0, 2);

  QpInstance inst;
  inst.u_ref = Vector(m);
  Vector witness(m);
  for (int i = 0; i < m; ++i) {
    inst.u_ref(i) = uniform(rng, -2.0, 2.0);
    witness(i) = uniform(rng, -2.0, 2.0);
  }

  const auto random_row = [&](double min_norm) {
    Vector a(m);
    do {
      for (int i = 0; i < m; ++i) a(i) = uniform(rng, -1.0, 1.0);
    } while (a.norm() < min_norm);
    return a;
  };

  // Equality rows kept independent by rejection.
  Matrix eq_stack(n_eq, m);
  for (int k = 0; k < n_eq; ++k) {
    for (int attempt = 0;; ++attempt) {
      const Vector a = random_row(0.3);
      eq_stack.row(k) = a.transpose();
      Eigen::JacobiSVD<Matrix> svd(eq_stack.topRows(k + 1));
      if (svd.singularValues()(k) > 0.1 || attempt > 50) break;
    }
    AffineConstraint row;
    row.kind = AffineConstraint::Kind::Equality;
    row.a = eq_stack.row(k).transpose();
    row.b = row.a.dot(witness);
    row.label = "eq" + std::to_string(k);
    inst.rows.push_back(row);
  }
  for (int k = 0; k < n_ineq; ++k) {
    AffineConstraint row;
    row.kind = AffineConstraint::Kind::Inequality;
    row.a = random_row(0.3);
    row.b = row.a.dot(witness) - uniform(rng, 0.0, 1.5);
    row.label = "ineq" + std::to_string(k);
    inst.rows.push_back(row);
  }
  return inst;
}

// Brute-force reference: enumerate candidate active sets; on each face,
// eliminate the pinned rows through a QR null-space parametrization and
// refine a shrinking uniform grid over the remaining coordinates. The grid
// does the minimizing; the refined point only counts if it satisfies every
// row of the original problem.
double grid_refinement_objective(const QpInstance& inst) {
  const int m = static_cast<int>(inst.u_ref.size());

  std::vector<const AffineConstraint*> eqs, ineqs;
  for (const auto& row : inst.rows) {
    (row.kind == AffineConstraint::Kind::Equality ? eqs : ineqs).push_back(&row);
  }
  const int n_ineq = static_cast<int>(ineqs.size());

  const auto feasible = [&](const Vector& u) {
    for (const auto& row : inst.rows) {
      const double slack = row.a.dot(u) - row.b;
      const double tol = 1e-9 * (1.0 + std::abs(row.b));
      if (row.kind == AffineConstraint::Kind::Equality ? std::abs(slack) > tol
                                                       : slack < -tol) {
        return false;
      }
    }
    return true;
  };

  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << n_ineq); ++mask) {
    std::vector<const AffineConstraint*> pinned = eqs;
    for (int i = 0; i < n_ineq; ++i) {
      if (mask & (1u << i)) pinned.push_back(ineqs[i]);
    }

    Vector u_part = Vector::Zero(m);
    Matrix basis = Matrix::Identity(m, m);
    if (!pinned.empty()) {
      const int k = static_cast<int>(pinned.size());
      Matrix E(k, m);
      Vector d(k);
      for (int i = 0; i < k; ++i) {
        E.row(i) = pinned[i]->a.transpose();
        d(i) = pinned[i]->b;
      }
      const auto qr = E.colPivHouseholderQr();
      if (qr.rank() < k) continue;  // dependent rows; a smaller face covers this
      u_part = qr.solve(d);
      if ((E * u_part - d).cwiseAbs().maxCoeff() > 1e-9) continue;
      Eigen::HouseholderQR<Matrix> null_qr(E.transpose());
      const Matrix Q = null_qr.householderQ();
      basis = Q.rightCols(m - k);
    }

    const int dim = static_cast<int>(basis.cols());
    Vector refined = u_part;
    if (dim > 0) {
      // Unconstrained zoom on the face: the objective is strongly convex,
      // so recentering on the grid argmin keeps the minimizer contained.
      Vector center = Vector::Zero(dim);
      double radius = 12.0;
      const int points = 5;
      for (int iter = 0; iter < 80; ++iter) {
        const double cell = 2.0 * radius / (points - 1);
        std::vector<int> counter(dim, 0);
        bool done = false;
        Vector best_y = center;
        double best_f = std::numeric_limits<double>::infinity();
        while (!done) {
          Vector y(dim);
          for (int d2 = 0; d2 < dim; ++d2) y(d2) = center(d2) - radius + counter[d2] * cell;
          const double f = (u_part + basis * y - inst.u_ref).squaredNorm();
          if (f < best_f) {
            best_f = f;
            best_y = y;
          }
          int d2 = 0;
          while (d2 < dim && ++counter[d2] == points) counter[d2++] = 0;
          done = d2 == dim;
        }
        center = best_y;
        radius *= 0.7;
      }
      refined = u_part + basis * center;
    }

    if (feasible(refined)) best = std::min(best, (refined - inst.u_ref).squaredNorm());
  }
  return best;
}

}  // namespace

SuiteResult suite_qp_kkt(std::uint64_t seed, int cases, const Hooks& hooks) {
  (void)hooks;  // no Hurwitz verdict on this path
  SuiteResult res{"qp_kkt", true, cases, ""};
  Rng rng(seed ^ 0x71706b6bull);
  for (int i = 0; i < cases; ++i) {
    const QpInstance inst = random_feasible_qp(rng);
    FilterDecision d;
    try {
      d = solve_qp_small(inst.u_ref, inst.rows);
    } catch (const Error& e) {
      res.pass = false;
      res.detail = "case " + std::to_string(i) + ": solver threw: " + e.what();
      return res;
    }

    const double obj = (d.u - inst.u_ref).squaredNorm();
    const double oracle = grid_refinement_objective(inst);
    if (std::abs(obj - oracle) > 1e-6 * (1.0 + std::abs(oracle))) {
      std::ostringstream os;
      os << "case " << i << ": objective " << obj << " vs grid oracle " << oracle;
      res.pass = false;
      res.detail = os.str();
      return res;
    }

    // KKT stationarity with dual feasibility on the active rows.
    std::vector<const AffineConstraint*> active;
    std::vector<bool> is_ineq;
    for (const auto& row : inst.rows) {
      const double slack = row.a.dot(d.u) - row.b;
      const bool tight = row.kind == AffineConstraint::Kind::Equality ||
                         std::abs(slack) <= 1e-6 * (1.0 + std::abs(row.b));
      if (tight) {
        active.push_back(&row);
        is_ineq.push_back(row.kind == AffineConstraint::Kind::Inequality);
      }
    }
    const Vector grad = d.u - inst.u_ref;
    if (active.empty()) {
      if (grad.norm() > 1e-8) {
        res.pass = false;
        res.detail = "case " + std::to_string(i) + ": free solution not at u_ref";
        return res;
      }
      continue;
    }
    Matrix At(static_cast<int>(inst.u_ref.size()), static_cast<int>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) At.col(static_cast<int>(k)) = active[k]->a;
    const Vector lambda = At.colPivHouseholderQr().solve(grad);
    const double stationarity = (grad - At * lambda).norm();
    bool dual_ok = true;
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (is_ineq[k] && lambda(static_cast<int>(k)) < -1e-8) dual_ok = false;
    }
    if (stationarity > 1e-8 * (1.0 + grad.norm()) || !dual_ok) {
      std::ostringstream os;
      os << "case " << i << ": KKT stationarity " << stationarity << ", dual feasible "
         << (dual_ok ? "yes" : "no");
      res.pass = false;
      res.detail = os.str();
      return res;
    }
  }
  return res;
}

SuiteResult suite_min_phase_equivalence(std::uint64_t seed, int cases, const Hooks& hooks) {
  SuiteResult res{"min_phase_equivalence", true, cases, ""};
  Rng rng(seed ^ 0x6d696e70ull);
  for (int i = 0; i < cases; ++i) {
    const int n = uniform_int(rng, 3, 5);
    const int r = uniform_int(rng, 1, n - 1);
    const int q = n - r;

    const bool want_hurwitz = uniform_int(rng, 0, 1) == 1;
    std::vector<double> eigs(q);
    for (int j = 0; j < q; ++j) {
      eigs[j] = want_hurwitz ? uniform(rng, -3.0, -0.2)
                             : (uniform_int(rng, 0, 1) ? uniform(rng, 0.2, 2.0)
                                                       : uniform(rng, -3.0, -0.2));
    }
    if (!want_hurwitz) eigs[0] = uniform(rng, 0.2, 2.0);  // force one unstable mode
    const Matrix A_eta_true = matrix_with_spectrum(rng, eigs);

    // Block normal form: an r-chain driven by u plus internal rows.
    Matrix Az = Matrix::Zero(n, n);
    for (int j = 0; j + 1 < r; ++j) Az(j, j + 1) = 1.0;
    for (int j = 0; j < n; ++j) Az(r - 1, j) = uniform(rng, -2.0, 2.0);
    for (int row2 = 0; row2 < q; ++row2) {
      for (int col = 0; col < r; ++col) Az(r + row2, col) = uniform(rng, -2.0, 2.0);
    }
    Az.bottomRightCorner(q, q) = A_eta_true;

    Vector bz = Vector::Zero(n);
    bz(r - 1) = uniform(rng, 0.5, 2.0);
    RowVector cz = RowVector::Zero(n);
    cz(0) = 1.0;

    const Matrix S = random_similarity(rng, n);
    const Matrix S_inv = S.inverse();
    const Matrix A = S * Az * S_inv;
    const Vector b = S * bz;
    const RowVector c = cz * S_inv;

    Vector gammas(r);
    for (int j = 0; j < r; ++j) gammas(j) = uniform(rng, 0.5, 5.0);
    const GammaSpec spec = build_gamma_spec(gammas);

    ZeroDynamicsLinear zd;
    try {
      zd = extract_internal_linear(A, b, c, spec);
    } catch (const Error& e) {
      res.pass = false;
      res.detail = "case " + std::to_string(i) + ": extraction threw: " + e.what();
      return res;
    }

    const double annihilation = (zd.N * b).cwiseAbs().maxCoeff();
    if (annihilation > 1e-10 * (1.0 + b.cwiseAbs().maxCoeff())) {
      res.pass = false;
      res.detail = "case " + std::to_string(i) + ": N b residual " +
                   std::to_string(annihilation);
      return res;
    }

    // The extracted model must reproduce the internal field of the plant
    // itself: N A x = A_eta (N x) + B_eta T xi(x) at a probe state.
    {
      Vector x(n);
      for (int j = 0; j < n; ++j) x(j) = uniform(rng, -2.0, 2.0);
      Vector xi(r);
      RowVector row = c;
      for (int k = 0; k < r; ++k) {
        xi(k) = row.dot(x);
        row = row * A;
      }
      const Vector direct = zd.N * (A * x);
      const Vector model = zd.A_eta * (zd.N * x) + zd.B_eta * (spec.T * xi);
      if ((direct - model).cwiseAbs().maxCoeff() > 1e-7) {
        res.pass = false;
        res.detail = "case " + std::to_string(i) + ": internal field mismatch " +
                     std::to_string((direct - model).cwiseAbs().maxCoeff());
        return res;
      }
    }

    const bool verdict = hooked_hurwitz(char_poly(zd.A_eta), hooks);
    const bool library_verdict = zd.min_phase == MinPhaseVerdict::MinimumPhase;
    if (verdict != want_hurwitz || (!hooks.negate_routh && library_verdict != want_hurwitz)) {
      std::ostringstream os;
      os << "case " << i << ": n=" << n << " r=" << r << " constructed "
         << (want_hurwitz ? "Hurwitz" : "non-Hurwitz") << ", verdict "
         << (verdict ? "minimum phase" : "nonminimum phase");
      res.pass = false;
      res.detail = os.str();
      return res;
    }
  }
  return res;
}

std::vector<SuiteResult> run_all_suites(std::uint64_t seed, const Hooks& hooks) {
  return {
      suite_gamma_norm_bound(seed, 1000, hooks),
      suite_lyapunov_residual(seed, 200, hooks),
      suite_qp_kkt(seed, 500, hooks),
      suite_min_phase_equivalence(seed, 200, hooks),
  };
}

}  // namespace cbfmp::verify
