#include "cbfmp/filters.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace cbfmp {

namespace {

constexpr double kDegenerateTol = 1e-9;
constexpr double kFeasTol = 1e-9;
constexpr double kInterventionTol = 1e-9;

bool tight(const AffineConstraint& row, const Vector& u) {
  return std::abs(row.a.dot(u) - row.b) <= 1e-7 * (1.0 + std::abs(row.b));
}

std::vector<std::string> tight_labels(const std::vector<AffineConstraint>& rows,
                                      const Vector& u) {
  std::vector<std::string> labels;
  for (const auto& row : rows) {
    if (tight(row, u)) labels.push_back(row.label);
  }
  return labels;
}

}  // namespace

FilterDecision min_norm_filter(const OutputChain& chain, const GammaSpec& spec,
                               const Vector& x, const Vector& u_ref) {
  FilterDecision d;
  const double mu_ref = eval_mu(chain, spec, x, u_ref);
  if (mu_ref >= 0.0) {
    d.u = u_ref;
    d.mu = mu_ref;
    return d;
  }

  const RowVector a = chain.lglfh(x);
  const double a2 = a.squaredNorm();
  if (std::sqrt(a2) < kDegenerateTol) {
    throw DegenerateConstraint("min_norm_filter: decoupling row vanished at runtime");
  }

  // Projection onto the half-space mu >= 0; collapses to the saturation
  // law max/min(u_sat, u_ref) in the single-input case.
  d.u = u_ref - (mu_ref / a2) * a.transpose();
  d.mu = eval_mu(chain, spec, x, d.u);
  d.active = {"barrier"};
  d.intervened = (d.u - u_ref).cwiseAbs().maxCoeff() > kInterventionTol;
  return d;
}

FilterDecision solve_qp_small(const Vector& u_ref,
                              const std::vector<AffineConstraint>& constraints) {
  const int m = static_cast<int>(u_ref.size());

  std::vector<AffineConstraint> eqs, ineqs;
  for (const auto& row : constraints) {
    if (static_cast<int>(row.a.size()) != m) {
      throw Error("solve_qp_small: constraint dimension mismatch");
    }
    const double norm = row.a.norm();
    if (norm < 1e-12) {
      // Zero row: vacuous when satisfiable by any u, otherwise hopeless.
      const bool ok = row.kind == AffineConstraint::Kind::Inequality
                          ? row.b <= kFeasTol
                          : std::abs(row.b) <= kFeasTol;
      if (!ok) throw Infeasible("solve_qp_small: unsatisfiable zero row '" + row.label + "'");
      continue;
    }
    (row.kind == AffineConstraint::Kind::Equality ? eqs : ineqs).push_back(row);
  }

  const auto feasible = [&](const Vector& u) {
    for (const auto& row : eqs) {
      if (std::abs(row.a.dot(u) - row.b) > kFeasTol * (1.0 + std::abs(row.b))) return false;
    }
    for (const auto& row : ineqs) {
      if (row.a.dot(u) < row.b - kFeasTol * (1.0 + std::abs(row.b))) return false;
    }
    return true;
  };

  const int n_ineq = static_cast<int>(ineqs.size());
  const unsigned n_masks = 1u << n_ineq;

  bool found = false;
  double best_obj = 0.0;
  Vector best_u;

  // Masks ordered by active-set size so ties resolve toward the smallest set.
  std::vector<unsigned> masks(n_masks);
  for (unsigned i = 0; i < n_masks; ++i) masks[i] = i;
  std::stable_sort(masks.begin(), masks.end(), [](unsigned a, unsigned b) {
    return std::popcount(a) < std::popcount(b);
  });

  for (unsigned mask : masks) {
    std::vector<const AffineConstraint*> active;
    for (const auto& row : eqs) active.push_back(&row);
    for (int i = 0; i < n_ineq; ++i) {
      if (mask & (1u << i)) active.push_back(&ineqs[i]);
    }

    Vector candidate;
    if (active.empty()) {
      candidate = u_ref;
    } else {
      const int k = static_cast<int>(active.size());
      Matrix A_act(k, m);
      Vector b_act(k);
      for (int i = 0; i < k; ++i) {
        A_act.row(i) = active[i]->a.transpose();
        b_act(i) = active[i]->b;
      }
      try {
        const Vector lambda = solve_linear(A_act * A_act.transpose(),
                                           b_act - A_act * u_ref);
        candidate = u_ref + A_act.transpose() * lambda;
      } catch (const SingularMatrix&) {
        continue;  // dependent rows; another subset covers this geometry
      }
    }

    if (!feasible(candidate)) continue;
    const double obj = (candidate - u_ref).squaredNorm();
    if (!found || obj < best_obj - 1e-12) {
      found = true;
      best_obj = obj;
      best_u = candidate;
    }
  }

  if (!found) throw Infeasible("solve_qp_small: no active set yields a feasible point");

  FilterDecision d;
  d.u = best_u;
  d.active = tight_labels(constraints, best_u);
  d.intervened = (best_u - u_ref).cwiseAbs().maxCoeff() > kInterventionTol;
  return d;
}

FilterDecision clf_cbf_qp(const OutputChain& chain, const GammaSpec& spec,
                          const Vector& x, const Vector& u_ref, const ClfCallbacks& clf,
                          double lambda, bool relax) {
  const Vector xi = eval_xi(chain, x);
  double drift = chain.lfh[chain.r](x);
  for (int i = 0; i < spec.r; ++i) drift += spec.k.c[i] * xi(i);

  AffineConstraint barrier;
  barrier.kind = AffineConstraint::Kind::Inequality;
  barrier.a = chain.lglfh(x).transpose();
  barrier.b = -drift;
  barrier.label = "barrier";

  // L_f W + L_g W u + lambda W <= 0 rewritten as (-L_g W) u >= L_f W + lambda W.
  AffineConstraint stability;
  stability.kind = AffineConstraint::Kind::Inequality;
  stability.a = -clf.LgW(x).transpose();
  stability.b = clf.LfW(x) + lambda * clf.W(x);
  stability.label = "clf";

  FilterDecision d;
  try {
    d = solve_qp_small(u_ref, {barrier, stability});
  } catch (const Infeasible&) {
    if (!relax) throw;
    d = solve_qp_small(u_ref, {barrier});
    d.relaxed_clf = true;
  }
  d.mu = eval_mu(chain, spec, x, d.u);
  return d;
}

FilterDecision track_kappa_ps(const OutputChain& chain, const GammaSpec& spec,
                              const Vector& x, double kappa_value, int channel) {
  if (kappa_value < 0.0) {
    throw NegativeMu("track_kappa_ps: kappa must be nonnegative");
  }
  const RowVector a = chain.lglfh(x);
  if (channel < 0 || channel >= a.size()) throw Error("track_kappa_ps: bad channel");
  if (std::abs(a(channel)) < kDegenerateTol) {
    throw DegenerateConstraint("track_kappa_ps: decoupling coefficient vanished");
  }

  Vector u = Vector::Zero(a.size());
  const double mu_at_zero = eval_mu(chain, spec, x, u);
  u(channel) = (kappa_value - mu_at_zero) / a(channel);

  FilterDecision d;
  d.u = u;
  d.mu = kappa_value;
  d.intervened = true;
  if (kappa_value <= 1e-9) d.active = {"barrier"};
  return d;
}

}  // namespace cbfmp
