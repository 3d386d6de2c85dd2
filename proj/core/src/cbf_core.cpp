#include "cbfmp/cbf_core.hpp"

#include <cmath>

namespace cbfmp {

namespace {

// Ascending coefficients, leading term included, of prod (s + g_i).
std::vector<double> convolve_roots(const Vector& gammas, int count) {
  std::vector<double> poly{1.0};
  for (int i = 0; i < count; ++i) {
    std::vector<double> next(poly.size() + 1, 0.0);
    for (std::size_t j = 0; j < poly.size(); ++j) {
      next[j] += poly[j] * gammas(i);
      next[j + 1] += poly[j];
    }
    poly = std::move(next);
  }
  return poly;
}

void require_positive_rates(const Vector& gammas) {
  if (gammas.size() < 1) throw InvalidGamma("at least one decay rate required");
  for (int i = 0; i < gammas.size(); ++i) {
    if (!(gammas(i) > 0.0) || !std::isfinite(gammas(i))) {
      throw InvalidGamma("decay rates must be strictly positive, got " +
                         std::to_string(gammas(i)));
    }
  }
}

}  // namespace

PolyCoeffs expand_gamma_polynomial(const Vector& gammas) {
  require_positive_rates(gammas);
  const int r = static_cast<int>(gammas.size());
  std::vector<double> full = convolve_roots(gammas, r);
  PolyCoeffs p;
  p.c.assign(full.begin(), full.end() - 1);  // drop the implicit leading 1
  return p;
}

GammaSpec build_gamma_spec(const Vector& gammas) {
  require_positive_rates(gammas);
  GammaSpec spec;
  spec.r = static_cast<int>(gammas.size());
  spec.gammas = gammas;
  spec.k = expand_gamma_polynomial(gammas);

  const int r = spec.r;
  // Row i carries the ascending coefficients of prod_{k<i} (s + g_k), so
  // phi_{i+1} = sum_j T(i, j) L_f^j h with a unit diagonal.
  spec.T = Matrix::Zero(r, r);
  for (int i = 0; i < r; ++i) {
    const std::vector<double> row = convolve_roots(gammas, i);
    for (int j = 0; j <= i; ++j) spec.T(i, j) = row[j];
  }

  spec.A_k = Matrix::Zero(r, r);
  for (int i = 0; i + 1 < r; ++i) spec.A_k(i, i + 1) = 1.0;
  for (int j = 0; j < r; ++j) spec.A_k(r - 1, j) = -spec.k.c[j];

  spec.A_gamma = Matrix::Zero(r, r);
  for (int i = 0; i < r; ++i) {
    spec.A_gamma(i, i) = -gammas(i);
    if (i + 1 < r) spec.A_gamma(i, i + 1) = 1.0;
  }

  spec.B = Vector::Zero(r);
  spec.B(r - 1) = 1.0;

  // Gamma = -A_gamma^{-1} B in closed form: suffix reciprocal products.
  spec.Gamma = Vector::Zero(r);
  spec.Gamma(r - 1) = 1.0 / gammas(r - 1);
  for (int i = r - 2; i >= 0; --i) spec.Gamma(i) = spec.Gamma(i + 1) / gammas(i);

  return spec;
}

Vector eval_xi(const OutputChain& chain, const Vector& x) {
  Vector xi(chain.r);
  for (int k = 0; k < chain.r; ++k) xi(k) = chain.lfh[k](x);
  if (!xi.allFinite()) throw NonFinite("eval_xi: non-finite chain value");
  return xi;
}

double eval_mu(const OutputChain& chain, const GammaSpec& spec, const Vector& x,
               const Vector& u) {
  if (chain.r != spec.r) throw Error("eval_mu: chain and gamma spec disagree on r");
  const Vector xi = eval_xi(chain, x);
  double mu = chain.lfh[chain.r](x) + chain.lglfh(x).dot(u);
  for (int i = 0; i < spec.r; ++i) mu += spec.k.c[i] * xi(i);
  if (!std::isfinite(mu)) throw NonFinite("eval_mu: non-finite value");
  return mu;
}

bool in_S_phi(const OutputChain& chain, const GammaSpec& spec, const Vector& x) {
  const Vector phi = spec.T * eval_xi(chain, x);
  return phi.minCoeff() >= -1e-9;
}

Vector equilibria_line_point(const GammaSpec& spec, double mu_e) {
  if (mu_e < 0.0) throw NegativeMu("equilibria_line_point: mu_e must be nonnegative");
  return spec.Gamma * mu_e;
}

CascadeState eval_cascade(const OutputChain& chain, const GammaSpec& spec,
                          const Vector& x, const Vector& u) {
  CascadeState s;
  s.xi = eval_xi(chain, x);
  s.phi = spec.T * s.xi;
  s.mu = eval_mu(chain, spec, x, u);
  return s;
}

void validate_output_chain(const OutputChain& chain, const StateMap& drift,
                           const std::vector<Vector>& samples, double rel_tol) {
  for (const Vector& x : samples) {
    const Vector fx = drift(x);
    const double eps = 1e-6 * (1.0 + x.cwiseAbs().maxCoeff()) /
                       (1.0 + fx.cwiseAbs().maxCoeff());
    for (int k = 0; k + 1 <= chain.r; ++k) {
      const double forward = chain.lfh[k](x + eps * fx);
      const double backward = chain.lfh[k](x - eps * fx);
      const double dd = (forward - backward) / (2.0 * eps);
      const double expected = chain.lfh[k + 1](x);
      if (std::abs(dd - expected) > rel_tol * (1.0 + std::abs(expected))) {
        throw NonFinite("validate_output_chain: L_f^" + std::to_string(k + 1) +
                        " h inconsistent with the chain at a sample state");
      }
    }
    if (chain.lglfh(x).cwiseAbs().maxCoeff() <= 1e-9) {
      throw NonFinite("validate_output_chain: decoupling row vanishes at a sample state");
    }
  }
}

}  // namespace cbfmp
