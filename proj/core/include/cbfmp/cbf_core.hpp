#pragma once

#include <functional>
#include <vector>

#include "cbfmp/numerics.hpp"

namespace cbfmp {

using ScalarFn = std::function<double(const Vector&)>;
using RowFn = std::function<RowVector(const Vector&)>;
using StateMap = std::function<Vector(const Vector&)>;

/// Decay rates gamma_1..gamma_r together with the derived constraint
/// algebra: the constraint coefficient vector k with roots -gamma_i, the
/// triangular change of coordinates T from the output derivative vector xi
/// to the cascading constraint vector phi = T xi, the companion matrix A_k,
/// the bidiagonal A_gamma = T A_k T^{-1}, the input column B = e_r, and
/// Gamma = -A_gamma^{-1} B whose entries are the cascaded reciprocals
/// [(g1..gr)^{-1}, (g2..gr)^{-1}, ..., gr^{-1}].
struct GammaSpec {
  int r = 0;
  Vector gammas;
  PolyCoeffs k;
  Matrix T;
  Matrix A_k;
  Matrix A_gamma;
  Vector B;
  Vector Gamma;

  double gamma_min() const { return gammas.minCoeff(); }
};

/// The constraint function h and its Lie-derivative chain for one plant.
/// lfh holds L_f^k h for k = 0..r (so lfh[0] == h and lfh[r] is the drift
/// term of the r-th derivative); lglfh is the row L_g L_f^{r-1} h of input
/// coefficients, with one entry per input channel.
struct OutputChain {
  int r = 0;
  ScalarFn h;
  std::vector<ScalarFn> lfh;
  RowFn lglfh;
};

/// Snapshot of the constraint coordinates at one state/input pair.
struct CascadeState {
  Vector xi;
  Vector phi;
  double mu = 0.0;
};

/// Monic coefficients of (s+g1)(s+g2)...(s+gr) by iterated convolution.
/// Throws InvalidGamma if any rate is nonpositive.
PolyCoeffs expand_gamma_polynomial(const Vector& gammas);

/// Populates every derived field of GammaSpec. Rates are kept in the order
/// given by the caller.
GammaSpec build_gamma_spec(const Vector& gammas);

/// Output derivative vector xi(x) = [h, L_f h, ..., L_f^{r-1} h].
Vector eval_xi(const OutputChain& chain, const Vector& x);

/// Virtual control input mu(x, u) = L_f^r h + L_g L_f^{r-1} h u + k^T xi.
/// Affine in u with slope lglfh(x).
double eval_mu(const OutputChain& chain, const GammaSpec& spec, const Vector& x,
               const Vector& u);

/// Membership in S_phi, the positive orthant of the cascading constraint
/// vector: true iff every phi_i(x) >= -1e-9.
bool in_S_phi(const OutputChain& chain, const GammaSpec& spec, const Vector& x);

/// The point phi_e = Gamma mu_e on the equilibria line. Throws NegativeMu
/// for mu_e < 0.
Vector equilibria_line_point(const GammaSpec& spec, double mu_e);

/// Evaluates xi, phi = T xi and mu at once.
CascadeState eval_cascade(const OutputChain& chain, const GammaSpec& spec,
                          const Vector& x, const Vector& u);

/// Finite-difference guard for caller-supplied analytic chains: at each
/// sample state, the directional derivative of L_f^k h along the drift field
/// must match L_f^{k+1} h within rel_tol, and lglfh must have an entry of
/// magnitude > 1e-9. Throws NonFinite on the first violated sample.
void validate_output_chain(const OutputChain& chain, const StateMap& drift,
                           const std::vector<Vector>& samples, double rel_tol = 1e-4);

}  // namespace cbfmp
