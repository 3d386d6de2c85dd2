#pragma once

#include <optional>

#include "cbfmp/cbf_core.hpp"

namespace cbfmp {

enum class MinPhaseVerdict { MinimumPhase, NonMinimumPhase };

/// Internal dynamics of a single-input linear plant in (phi, eta)
/// coordinates: eta_dot = A_eta eta + B_eta phi, with eta = N x and the
/// zero-dynamics input column BGamma = B_eta Gamma.
struct ZeroDynamicsLinear {
  Matrix A_eta;
  Matrix B_eta;
  Vector BGamma;
  Matrix N;
  MinPhaseVerdict min_phase = MinPhaseVerdict::NonMinimumPhase;
};

/// Quadratic Lyapunov sandwich/decay constants together with the Lipschitz
/// constant of the internal dynamics in phi and the slowest decay rate.
struct MinPhaseCertificate {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double alpha3 = 0.0;
  double alpha4 = 0.0;
  double l_phi = 0.0;
  double gamma_min = 0.0;
};

enum class SufficiencyVerdict { Pass, FailAlpha, Unknown };

/// Smallest r >= 1 with c A^{r-1} B carrying an entry of magnitude > 1e-9.
/// Throws NoRelativeDegree when no such r <= n exists.
int linear_relative_degree(const Matrix& A, const Matrix& B, const RowVector& c);

/// Analytic Lie chain of h(x) = c x for the linear plant (A, B): the rows
/// c A^k evaluated on demand, with the constant input row c A^{r-1} B.
OutputChain make_linear_output_chain(const Matrix& A, const Matrix& B, const RowVector& c);

/// Extracts the internal dynamics of a single-input linear plant. The rows
/// of N annihilate b, prefer unit coordinate directions, and complete
/// [dxi; N] to a nonsingular change of coordinates. The verdict is the
/// Hurwitz status of A_eta. Throws SingularCoordinates when no completion
/// exists.
ZeroDynamicsLinear extract_internal_linear(const Matrix& A, const Vector& b,
                                           const RowVector& c, const GammaSpec& spec);

/// Equilibrium eta_e = -A_eta^{-1} BGamma mu_e of the zero dynamics under a
/// fixed virtual input.
Vector fixed_mu_equilibrium(const ZeroDynamicsLinear& zd, double mu_e);

using InternalField = std::function<Vector(const Vector& eta, const Vector& phi)>;

struct JacobianVerdict {
  Matrix jacobian;
  bool exponentially_stable = false;
};

/// Central finite-difference Jacobian of the internal field in eta at
/// (eta_e, phi_e), with a Hurwitz check of its characteristic polynomial.
JacobianVerdict local_min_phase_jacobian(const InternalField& q_cbf, const Vector& eta_e,
                                         const Vector& phi_e);

/// Certificate that no u-free internal coordinates exist for a multi-input
/// plant: a unit coefficient vector c orthogonal to the decoupling row and
/// the resulting input-span direction q = g c, which no valid eta can
/// annihilate.
struct ObstructionWitness {
  Vector c;
  Vector q;
};

/// For m >= 2 with independent input columns, returns the witness above;
/// for m = 1 returns nothing. Throws DependentColumns when rank(g) < m.
std::optional<ObstructionWitness> multi_input_obstruction(const RowVector& lglfh_row,
                                                          const Matrix& g_cols);

/// The explicit alpha_4 > (alpha_3 l_phi / 2)^2 inequality behind the
/// "gamma_min large enough" boundedness argument. Throws InvalidCertificate
/// on nonpositive entries.
SufficiencyVerdict gamma_min_sufficiency(const MinPhaseCertificate& cert);

}  // namespace cbfmp
