#pragma once

#include <string>
#include <vector>

#include "cbfmp/cbf_core.hpp"

namespace cbfmp {

/// One affine row of a control-input program: a^T u >= b (inequality) or
/// a^T u = b (equality).
struct AffineConstraint {
  enum class Kind { Inequality, Equality };
  Kind kind = Kind::Inequality;
  Vector a;
  double b = 0.0;
  std::string label;
};

/// Outcome of one filter evaluation.
struct FilterDecision {
  Vector u;
  double mu = 0.0;
  std::vector<std::string> active;  // labels of constraints tight at u
  bool intervened = false;          // u differs from the reference beyond 1e-9
  bool relaxed_clf = false;
};

/// Min-norm safety filter: the closest input to u_ref satisfying the barrier
/// constraint mu(x, u) >= 0. Single-input this is the max/min saturation
/// law; multi-input it is the projection onto the barrier half-space.
/// Throws DegenerateConstraint when an intervention is required but
/// ||lglfh(x)|| < 1e-9.
FilterDecision min_norm_filter(const OutputChain& chain, const GammaSpec& spec,
                               const Vector& x, const Vector& u_ref);

/// Exact minimizer of 0.5||u - u_ref||^2 over a handful of affine rows,
/// found by enumerating active sets and solving each equality-constrained
/// subproblem through its KKT system. Ties are broken toward the smallest
/// active set. Throws Infeasible when no active set yields a feasible point.
FilterDecision solve_qp_small(const Vector& u_ref,
                              const std::vector<AffineConstraint>& constraints);

/// Control-Lyapunov callbacks: the function W, its drift derivative L_f W
/// and input derivative row L_g W.
struct ClfCallbacks {
  ScalarFn W;
  ScalarFn LfW;
  RowFn LgW;
};

/// CLF-CBF quadratic program: barrier row mu(x,u) >= 0 plus the stability
/// row L_f W + L_g W u + lambda W <= 0. When the rows conflict and relax is
/// set, the CLF row is dropped and the decision is flagged relaxed_clf.
FilterDecision clf_cbf_qp(const OutputChain& chain, const GammaSpec& spec,
                          const Vector& x, const Vector& u_ref, const ClfCallbacks& clf,
                          double lambda, bool relax);

/// Input that pins the virtual control input to a prescribed nonnegative
/// value, mu(x, u) = kappa_value, by affine inversion on one actuation
/// channel. Throws NegativeMu for kappa_value < 0 and DegenerateConstraint
/// when the channel coefficient is below 1e-9 in magnitude.
FilterDecision track_kappa_ps(const OutputChain& chain, const GammaSpec& spec,
                              const Vector& x, double kappa_value, int channel = 0);

}  // namespace cbfmp
