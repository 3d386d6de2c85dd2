#pragma once

#include <string>

#include "cbfmp/internal_analysis.hpp"
#include "cbfmp/simulation.hpp"

namespace cbfmp {

enum class FilterWiring {
  Unfiltered,
  MinNorm,
  KappaPs,
  BaselineSaturation,
  EqualityAugmentedQp,
  ClfCbfQp,
};

const char* to_string(FilterWiring w);

/// One fully wired study: plant, constraint chain, rates, reference
/// controller, filter policy, initial state and the outcome the wiring is
/// known to produce.
struct Scenario {
  std::string name;
  Plant plant;
  OutputChain chain;
  GammaSpec gamma;
  StateMap internal_map;  // empty when no internal coordinates configured
  StateMap reference;     // u_ref(x)
  FilterWiring wiring = FilterWiring::MinNorm;
  Vector x0;
  SimOptions sim;
  ClassifyOptions classification;
  Classification expected = Classification::Bounded;
  bool expected_drift = false;
  Policy policy;

  Probes probes() const { return Probes{&chain, &gamma, internal_map}; }
  Trajectory run() const { return simulate(plant, policy, probes(), x0, sim); }
};

// ---------------------------------------------------------------------------
// Single-input linear plant: 3 states, constraint h = x1, relative degree 2.
// The model parameter a decides the stability of the internal state x3.
// ---------------------------------------------------------------------------

struct LinearSiConfig {
  double a = -1.0;
  std::vector<double> gammas = {2.0, 3.0};
  FilterWiring wiring = FilterWiring::MinNorm;
  double mu_e = 7.5;  // virtual-input setpoint for the KappaPs wiring
  std::vector<double> x0 = {1.0, 0.0, 0.0};
  SimOptions sim{};
};

Scenario make_linear_si(const LinearSiConfig& cfg = {});

// ---------------------------------------------------------------------------
// Single-input cart-pole with a nonlinear drag term, constraint
// h = cos(theta) - cos(theta_max), relative degree 2.
// ---------------------------------------------------------------------------

struct CartpoleSiConfig {
  double gamma = 10.0;  // repeated rate gamma1 = gamma2
  double b_drag = 4.0;
  double theta_max = 60.0 * M_PI / 180.0;
  FilterWiring wiring = FilterWiring::KappaPs;
  std::vector<double> x0 = {0.1, M_PI / 6.0, 0.0, 0.0};
  SimOptions sim{1e-3, 30.0, 1e4};
  double drift_threshold = 10.0;
};

Scenario make_cartpole_si(const CartpoleSiConfig& cfg = {});

/// Accelerations of the dragged cart-pole solved for [sdot, thetadot, sddot,
/// thetaddot]; state layout x = [s, theta, sdot, thetadot]. Throws NonFinite
/// when cos(theta) vanishes or the result is not finite.
Vector cartpole_dynamics(double b, const Vector& x, double u);

/// Internal coordinates eta = [s, sdot cos(theta) - thetadot + b s] of the
/// dragged cart-pole.
Vector cartpole_internal(const Vector& x, double b);

/// Clipped arcsine target angle, |theta_d| <= theta_max.
double theta_d(double eta2, double theta_max);

/// Positively stabilizing virtual input gamma^2 (cos(theta_d) - cos(theta_max));
/// nonnegative by the clipping. Requires a repeated-rate spec.
double kappa_ps_cartpole(const Vector& eta, const GammaSpec& spec, double theta_max);

// ---------------------------------------------------------------------------
// Two-input variant of the linear plant (a = 1): the extra channel u2 can be
// committed to stabilizing the internal state through an equality row.
// ---------------------------------------------------------------------------

struct LinearMiConfig {
  double a = 1.0;
  std::vector<double> gammas = {2.0, 3.0};
  FilterWiring wiring = FilterWiring::EqualityAugmentedQp;
  std::vector<double> x0 = {1.0, 0.0, 0.0};
  SimOptions sim{};
};

Scenario make_linear_mi(const LinearMiConfig& cfg = {});

// ---------------------------------------------------------------------------
// Force-and-torque cart-pole without drag. The torque-only reference drives
// the pole to theta_target by IO linearization; the CLF-CBF-QP wiring adds a
// stability row on eta = [s, sdot].
// ---------------------------------------------------------------------------

struct CartpoleMiConfig {
  double gamma = 20.0;  // repeated rate
  double theta_target = 55.0 * M_PI / 180.0;
  double theta_max = 60.0 * M_PI / 180.0;
  std::vector<double> k_io = {25.0, 10.0};  // output-chain gains, poles at -5
  double lambda = 1.0;
  bool relax = true;
  FilterWiring wiring = FilterWiring::ClfCbfQp;
  std::vector<double> x0 = {0.0, -10.0 * M_PI / 180.0, 0.0, 12.0};
  SimOptions sim{};
  double drift_threshold = 10.0;
};

Scenario make_cartpole_mi(const CartpoleMiConfig& cfg = {});

/// Accelerations of the drag-free two-input cart-pole (u = [force, torque]).
Vector cartpole_mi_dynamics(const Vector& x, const Vector& u);

/// Single-channel IO linearization law u = (L_g L_f^{r-1} y)^{-1}
/// (-L_f^r y - k^T xi_y) for the designated channel of the given chain.
double io_linearize_siso(const OutputChain& ychain, const Vector& k_io, const Vector& x);

/// Names of all bundled scenarios, in a fixed presentation order.
std::vector<std::string> bundled_scenario_names();

}  // namespace cbfmp
