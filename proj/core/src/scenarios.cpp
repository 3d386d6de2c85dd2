#include "cbfmp/scenarios.hpp"

#include <cmath>

namespace cbfmp {

namespace {

constexpr double kThetaGuard = 85.0 * M_PI / 180.0;

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<int>(i)) = v[i];
  return out;
}

Matrix linear_plant_matrix(double a) {
  Matrix A(3, 3);
  A << 0, 1, 0,
       0, 0, 0,
       3, 1, a;
  return A;
}

// Reference gain for the 3-state plant: pole-placement seed at {-1,-2,-3},
// refined to the LQR gain with Q = I, R = I (weights are configuration, not
// model data).
Matrix linear_reference_gain(const Matrix& A, const Vector& b) {
  const Matrix K0 = place_poles(A, b, {-1.0, -2.0, -3.0});
  return lqr_gain(A, b, Matrix::Identity(3, 3), Matrix::Identity(1, 1), K0);
}

Policy min_norm_policy(OutputChain chain, GammaSpec gamma, StateMap reference) {
  return [chain = std::move(chain), gamma = std::move(gamma),
          reference = std::move(reference)](const Vector& x, double) {
    return min_norm_filter(chain, gamma, x, reference(x));
  };
}

FilterDecision passthrough(const OutputChain& chain, const GammaSpec& gamma,
                           const Vector& x, const Vector& u) {
  FilterDecision d;
  d.u = u;
  d.mu = eval_mu(chain, gamma, x, u);
  return d;
}

}  // namespace

const char* to_string(FilterWiring w) {
  switch (w) {
    case FilterWiring::Unfiltered: return "unfiltered";
    case FilterWiring::MinNorm: return "min_norm";
    case FilterWiring::KappaPs: return "kappa_ps";
    case FilterWiring::BaselineSaturation: return "baseline_saturation";
    case FilterWiring::EqualityAugmentedQp: return "equality_qp";
    case FilterWiring::ClfCbfQp: return "clf_cbf_qp";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Single-input linear plant
// ---------------------------------------------------------------------------

Scenario make_linear_si(const LinearSiConfig& cfg) {
  if (std::abs(cfg.a) < 1e-9) throw Error("linear_si: a must be nonzero");

  const double a = cfg.a;
  const Matrix A = linear_plant_matrix(a);
  Vector b(3);
  b << 0, 1, 0;
  RowVector c(3);
  c << 1, 0, 0;

  Scenario s;
  s.name = "linear_si";
  s.gamma = build_gamma_spec(to_vector(cfg.gammas));
  s.chain = make_linear_output_chain(A, b, c);
  s.plant.n = 3;
  s.plant.m = 1;
  s.plant.f = [A](const Vector& x) { return (A * x).eval(); };
  s.plant.g = [b](const Vector&) { return Matrix(b); };

  // Undriven equilibria span [a, 0, -3]; scaled so x_e = [1.25, 0, -3.75/a].
  Vector x_e(3);
  x_e << 1.25, 0.0, -3.75 / a;
  const Matrix K = linear_reference_gain(A, b);
  s.reference = [K, x_e](const Vector& x) { return (-K * (x - x_e)).eval(); };

  const ZeroDynamicsLinear zd = extract_internal_linear(A, b, c, s.gamma);
  s.internal_map = [N = zd.N](const Vector& x) { return (N * x).eval(); };

  s.wiring = cfg.wiring;
  if (cfg.wiring == FilterWiring::KappaPs) {
    s.policy = [chain = s.chain, gamma = s.gamma, mu_e = cfg.mu_e](const Vector& x, double) {
      return track_kappa_ps(chain, gamma, x, mu_e);
    };
  } else {
    s.policy = min_norm_policy(s.chain, s.gamma, s.reference);
  }

  s.x0 = to_vector(cfg.x0);
  s.sim = cfg.sim;
  s.classification.blowup = cfg.sim.blowup;
  s.expected = a < 0 ? Classification::Bounded : Classification::Diverged;
  return s;
}

// ---------------------------------------------------------------------------
// Single-input cart-pole with drag
// ---------------------------------------------------------------------------

Vector cartpole_dynamics(double b, const Vector& x, double u) {
  const double theta = x(1);
  const double sdot = x(2);
  const double thetadot = x(3);
  const double sin_t = std::sin(theta);
  const double cos_t = std::cos(theta);
  const double D = 1.0 + sin_t * sin_t;
  if (std::abs(cos_t) < 1e-12) throw NonFinite("cartpole_dynamics: cos(theta) vanished");

  Vector dx(4);
  dx(0) = sdot;
  dx(1) = thetadot;
  dx(2) = (-thetadot * thetadot * sin_t + cos_t * sin_t) / D - b * sdot / cos_t + u / D;
  dx(3) = (-thetadot * thetadot * cos_t * sin_t + 2.0 * sin_t) / D + cos_t * u / D;
  if (!dx.allFinite()) throw NonFinite("cartpole_dynamics: non-finite derivative");
  return dx;
}

Vector cartpole_internal(const Vector& x, double b) {
  Vector eta(2);
  eta(0) = x(0);
  eta(1) = x(2) * std::cos(x(1)) - x(3) + b * x(0);
  return eta;
}

double theta_d(double eta2, double theta_max) {
  const double limit = std::sin(theta_max);
  return std::asin(std::clamp(eta2, -limit, limit));
}

double kappa_ps_cartpole(const Vector& eta, const GammaSpec& spec, double theta_max) {
  if (spec.r != 2 || std::abs(spec.gammas(0) - spec.gammas(1)) > 1e-9) {
    throw InvalidGamma("kappa_ps_cartpole: requires a repeated rate gamma1 = gamma2");
  }
  const double g = spec.gammas(0);
  const double kappa = g * g * (std::cos(theta_d(eta(1), theta_max)) - std::cos(theta_max));
  return std::max(kappa, 0.0);
}

namespace {

OutputChain cartpole_si_chain(double b, double theta_max) {
  OutputChain chain;
  chain.r = 2;
  const double cos_max = std::cos(theta_max);
  chain.lfh = {
      [cos_max](const Vector& x) { return std::cos(x(1)) - cos_max; },
      [](const Vector& x) { return -x(3) * std::sin(x(1)); },
      [](const Vector& x) {
        const double sin_t = std::sin(x(1));
        const double cos_t = std::cos(x(1));
        const double td = x(3);
        const double D = 1.0 + sin_t * sin_t;
        const double ft = (-td * td * cos_t * sin_t + 2.0 * sin_t) / D;
        return -ft * sin_t - td * td * cos_t;
      },
  };
  chain.h = chain.lfh[0];
  chain.lglfh = [](const Vector& x) {
    const double sin_t = std::sin(x(1));
    const double cos_t = std::cos(x(1));
    const double D = 1.0 + sin_t * sin_t;
    RowVector row(1);
    row << -sin_t * cos_t / D;
    return row;
  };
  (void)b;  // drag cancels out of the theta chain
  return chain;
}

// Tracks mu = kappa(x); falls back to u = 0 at states where the decoupling
// term vanishes (the converged upright pole), where the barrier holds with
// slack for any input.
Policy kappa_tracking_policy(OutputChain chain, GammaSpec gamma,
                             std::function<double(const Vector&)> kappa_of_x) {
  return [chain = std::move(chain), gamma = std::move(gamma),
          kappa_of_x = std::move(kappa_of_x)](const Vector& x, double) {
    if (std::abs(chain.lglfh(x)(0)) < 1e-9) {
      return passthrough(chain, gamma, x, Vector::Zero(1));
    }
    return track_kappa_ps(chain, gamma, x, kappa_of_x(x));
  };
}

}  // namespace

Scenario make_cartpole_si(const CartpoleSiConfig& cfg) {
  Scenario s;
  s.name = "cartpole_si";
  Vector gammas(2);
  gammas << cfg.gamma, cfg.gamma;
  s.gamma = build_gamma_spec(gammas);
  s.chain = cartpole_si_chain(cfg.b_drag, cfg.theta_max);

  const double b = cfg.b_drag;
  s.plant.n = 4;
  s.plant.m = 1;
  s.plant.f = [b](const Vector& x) {
    if (std::abs(x(1)) > kThetaGuard) throw NonFinite("cartpole_si: |theta| beyond 85 deg");
    return cartpole_dynamics(b, x, 0.0);
  };
  s.plant.g = [b](const Vector& x) {
    const double sin_t = std::sin(x(1));
    const double cos_t = std::cos(x(1));
    const double D = 1.0 + sin_t * sin_t;
    Matrix g(4, 1);
    g << 0.0, 0.0, 1.0 / D, cos_t / D;
    return g;
  };

  s.internal_map = [b](const Vector& x) { return cartpole_internal(x, b); };
  s.reference = [](const Vector&) { return Vector::Zero(1); };

  s.wiring = cfg.wiring;
  const double theta_max = cfg.theta_max;
  if (cfg.wiring == FilterWiring::BaselineSaturation) {
    s.policy = kappa_tracking_policy(s.chain, s.gamma, [](const Vector&) { return 0.0; });
    s.expected = Classification::Diverged;
    s.expected_drift = true;
  } else if (cfg.wiring == FilterWiring::KappaPs) {
    s.policy = kappa_tracking_policy(
        s.chain, s.gamma, [gamma = s.gamma, theta_max, b](const Vector& x) {
          return kappa_ps_cartpole(cartpole_internal(x, b), gamma, theta_max);
        });
    const bool stabilized = cfg.gamma >= 5.0;
    s.expected = stabilized ? Classification::Bounded : Classification::Diverged;
    s.expected_drift = !stabilized;
  } else {
    s.policy = min_norm_policy(s.chain, s.gamma, s.reference);
    s.expected = Classification::Diverged;
    s.expected_drift = true;
  }

  s.x0 = to_vector(cfg.x0);
  s.sim = cfg.sim;
  s.classification.blowup = cfg.sim.blowup;
  s.classification.drift_threshold = cfg.drift_threshold;
  return s;
}

// ---------------------------------------------------------------------------
// Two-input linear plant
// ---------------------------------------------------------------------------

Scenario make_linear_mi(const LinearMiConfig& cfg) {
  if (std::abs(cfg.a) < 1e-9) throw Error("linear_mi: a must be nonzero");

  const double a = cfg.a;
  const Matrix A = linear_plant_matrix(a);
  Matrix B(3, 2);
  B << 0, 0,
       1, 0,
       0, 1;
  RowVector c(3);
  c << 1, 0, 0;

  Scenario s;
  s.name = "linear_mi";
  s.gamma = build_gamma_spec(to_vector(cfg.gammas));
  s.chain = make_linear_output_chain(A, B, c);
  s.plant.n = 3;
  s.plant.m = 2;
  s.plant.f = [A](const Vector& x) { return (A * x).eval(); };
  s.plant.g = [B](const Vector&) { return B; };

  // Reference: the single-input law on the force channel, zero on the
  // auxiliary channel.
  Vector b1 = B.col(0);
  Vector x_e(3);
  x_e << 1.25, 0.0, -3.75 / a;
  const Matrix K = linear_reference_gain(A, b1);
  s.reference = [K, x_e](const Vector& x) {
    Vector u(2);
    u(0) = (-K * (x - x_e))(0);
    u(1) = 0.0;
    return u;
  };

  // The phi-coupling of the internal state eta = x3 matches the single-input
  // extraction; u2 enters eta_dot with unit coefficient.
  const ZeroDynamicsLinear zd = extract_internal_linear(A, b1, c, s.gamma);
  s.internal_map = [N = zd.N](const Vector& x) { return (N * x).eval(); };

  s.wiring = cfg.wiring;
  if (cfg.wiring == FilterWiring::EqualityAugmentedQp) {
    // u2 + BGamma mu = -(a_eta + 1) eta pins the zero dynamics to
    // eta_dot = -eta.
    const double bgamma = zd.BGamma(0);
    const double a_eta = zd.A_eta(0, 0);
    s.policy = [chain = s.chain, gamma = s.gamma, reference = s.reference, bgamma, a_eta,
                N = zd.N](const Vector& x, double) {
      const Vector xi = eval_xi(chain, x);
      double drift = chain.lfh[chain.r](x);
      for (int i = 0; i < gamma.r; ++i) drift += gamma.k.c[i] * xi(i);

      AffineConstraint barrier;
      barrier.kind = AffineConstraint::Kind::Inequality;
      barrier.a = chain.lglfh(x).transpose();
      barrier.b = -drift;
      barrier.label = "barrier";

      AffineConstraint stabilize;
      stabilize.kind = AffineConstraint::Kind::Equality;
      stabilize.a = bgamma * barrier.a;
      stabilize.a(1) += 1.0;
      stabilize.b = -(a_eta + 1.0) * (N * x)(0) - bgamma * drift;
      stabilize.label = "internal";

      FilterDecision d = solve_qp_small(reference(x), {barrier, stabilize});
      d.mu = eval_mu(chain, gamma, x, d.u);
      return d;
    };
    s.expected = Classification::Bounded;
  } else {
    s.policy = min_norm_policy(s.chain, s.gamma, s.reference);
    s.expected = a < 0 ? Classification::Bounded : Classification::Diverged;
  }

  s.x0 = to_vector(cfg.x0);
  s.sim = cfg.sim;
  s.classification.blowup = cfg.sim.blowup;
  return s;
}

// ---------------------------------------------------------------------------
// Two-input cart-pole (force and torque, no drag)
// ---------------------------------------------------------------------------

Vector cartpole_mi_dynamics(const Vector& x, const Vector& u) {
  const double theta = x(1);
  const double sdot = x(2);
  const double thetadot = x(3);
  const double sin_t = std::sin(theta);
  const double cos_t = std::cos(theta);
  const double D = 1.0 + sin_t * sin_t;

  Vector dx(4);
  dx(0) = sdot;
  dx(1) = thetadot;
  dx(2) = (-thetadot * thetadot * sin_t + cos_t * sin_t + u(0) + cos_t * u(1)) / D;
  dx(3) = (-thetadot * thetadot * cos_t * sin_t + 2.0 * sin_t + cos_t * u(0) + 2.0 * u(1)) / D;
  if (!dx.allFinite()) throw NonFinite("cartpole_mi_dynamics: non-finite derivative");
  return dx;
}

double io_linearize_siso(const OutputChain& ychain, const Vector& k_io, const Vector& x) {
  const RowVector a = ychain.lglfh(x);
  if (a.size() != 1) throw Error("io_linearize_siso: chain must expose one channel");
  if (std::abs(a(0)) < 1e-9) {
    throw DegenerateConstraint("io_linearize_siso: decoupling term vanished");
  }
  const Vector xi = eval_xi(ychain, x);
  double nu = 0.0;
  for (int i = 0; i < ychain.r; ++i) nu -= k_io(i) * xi(i);
  return (-ychain.lfh[ychain.r](x) + nu) / a(0);
}

namespace {

OutputChain cartpole_mi_chain(double theta_max) {
  OutputChain chain;
  chain.r = 2;
  const double cos_max = std::cos(theta_max);
  chain.lfh = {
      [cos_max](const Vector& x) { return std::cos(x(1)) - cos_max; },
      [](const Vector& x) { return -x(3) * std::sin(x(1)); },
      [](const Vector& x) {
        const double sin_t = std::sin(x(1));
        const double cos_t = std::cos(x(1));
        const double td = x(3);
        const double D = 1.0 + sin_t * sin_t;
        const double ft = (-td * td * cos_t * sin_t + 2.0 * sin_t) / D;
        return -ft * sin_t - td * td * cos_t;
      },
  };
  chain.h = chain.lfh[0];
  chain.lglfh = [](const Vector& x) {
    const double sin_t = std::sin(x(1));
    const double cos_t = std::cos(x(1));
    const double D = 1.0 + sin_t * sin_t;
    RowVector row(2);
    row << -sin_t * cos_t / D, -2.0 * sin_t / D;
    return row;
  };
  return chain;
}

// Chain of the tracking output y = theta - theta_target through the torque
// channel only.
OutputChain cartpole_mi_torque_chain(double theta_target) {
  OutputChain chain;
  chain.r = 2;
  chain.lfh = {
      [theta_target](const Vector& x) { return x(1) - theta_target; },
      [](const Vector& x) { return x(3); },
      [](const Vector& x) {
        const double sin_t = std::sin(x(1));
        const double cos_t = std::cos(x(1));
        const double td = x(3);
        const double D = 1.0 + sin_t * sin_t;
        return (-td * td * cos_t * sin_t + 2.0 * sin_t) / D;
      },
  };
  chain.h = chain.lfh[0];
  chain.lglfh = [](const Vector& x) {
    const double sin_t = std::sin(x(1));
    const double D = 1.0 + sin_t * sin_t;
    RowVector row(1);
    row << 2.0 / D;
    return row;
  };
  return chain;
}

}  // namespace

Scenario make_cartpole_mi(const CartpoleMiConfig& cfg) {
  Scenario s;
  s.name = "cartpole_mi";
  Vector gammas(2);
  gammas << cfg.gamma, cfg.gamma;
  s.gamma = build_gamma_spec(gammas);
  s.chain = cartpole_mi_chain(cfg.theta_max);

  s.plant.n = 4;
  s.plant.m = 2;
  s.plant.f = [](const Vector& x) {
    if (std::abs(x(1)) > kThetaGuard) throw NonFinite("cartpole_mi: |theta| beyond 85 deg");
    return cartpole_mi_dynamics(x, Vector::Zero(2));
  };
  s.plant.g = [](const Vector& x) {
    const double sin_t = std::sin(x(1));
    const double cos_t = std::cos(x(1));
    const double D = 1.0 + sin_t * sin_t;
    Matrix g(4, 2);
    g << 0.0, 0.0,
         0.0, 0.0,
         1.0 / D, cos_t / D,
         cos_t / D, 2.0 / D;
    return g;
  };

  s.internal_map = [](const Vector& x) {
    Vector eta(2);
    eta << x(0), x(2);
    return eta;
  };

  const OutputChain ychain = cartpole_mi_torque_chain(cfg.theta_target);
  const Vector k_io = to_vector(cfg.k_io);
  s.reference = [ychain, k_io](const Vector& x) {
    Vector u(2);
    u << 0.0, io_linearize_siso(ychain, k_io, x);
    return u;
  };

  s.wiring = cfg.wiring;
  if (cfg.wiring == FilterWiring::Unfiltered) {
    s.policy = [chain = s.chain, gamma = s.gamma, reference = s.reference](const Vector& x,
                                                                           double) {
      return passthrough(chain, gamma, x, reference(x));
    };
    s.expected = Classification::Unsafe;
  } else if (cfg.wiring == FilterWiring::MinNorm) {
    s.policy = min_norm_policy(s.chain, s.gamma, s.reference);
    s.expected = Classification::Diverged;
    s.expected_drift = true;
  } else {
    // CLF row on V(eta) = s^2 + sdot^2 alongside the barrier row.
    ClfCallbacks clf;
    clf.W = [](const Vector& x) { return x(0) * x(0) + x(2) * x(2); };
    clf.LfW = [](const Vector& x) {
      const double sin_t = std::sin(x(1));
      const double cos_t = std::cos(x(1));
      const double td = x(3);
      const double D = 1.0 + sin_t * sin_t;
      const double fs = (-td * td * sin_t + cos_t * sin_t) / D;
      return 2.0 * x(0) * x(2) + 2.0 * x(2) * fs;
    };
    clf.LgW = [](const Vector& x) {
      const double sin_t = std::sin(x(1));
      const double cos_t = std::cos(x(1));
      const double D = 1.0 + sin_t * sin_t;
      RowVector row(2);
      row << 2.0 * x(2) / D, 2.0 * x(2) * cos_t / D;
      return row;
    };
    s.policy = [chain = s.chain, gamma = s.gamma, reference = s.reference, clf,
                lambda = cfg.lambda, relax = cfg.relax](const Vector& x, double) {
      return clf_cbf_qp(chain, gamma, x, reference(x), clf, lambda, relax);
    };
    s.expected = Classification::Bounded;
  }

  s.x0 = to_vector(cfg.x0);
  s.sim = cfg.sim;
  s.classification.blowup = cfg.sim.blowup;
  s.classification.drift_threshold = cfg.drift_threshold;
  return s;
}

std::vector<std::string> bundled_scenario_names() {
  return {"linear_si", "cartpole_si", "linear_mi", "cartpole_mi"};
}

}  // namespace cbfmp
