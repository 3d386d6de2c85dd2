#pragma once

#include <limits>
#include <optional>

#include "cbfmp/filters.hpp"

namespace cbfmp {

/// Control-affine plant x_dot = f(x) + g(x) u.
struct Plant {
  int n = 0;
  int m = 0;
  StateMap f;                                 // n-vector drift
  std::function<Matrix(const Vector&)> g;     // n x m input matrix
};

using Policy = std::function<FilterDecision(const Vector& x, double t)>;

/// Optional signal probes recorded along a run.
struct Probes {
  const OutputChain* chain = nullptr;
  const GammaSpec* spec = nullptr;
  StateMap internal_map;  // eta(x); leave empty when not configured
};

struct SimOptions {
  double dt = 1e-3;
  double horizon = 20.0;
  double blowup = 1e4;  // early stop when ||x||_inf exceeds this
};

/// Uniformly sampled closed-loop run. All arrays share one length; inputs
/// are zero-order-held over each step (the policy is evaluated once per
/// step, at the step start).
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  std::vector<double> mu;
  std::vector<double> h;
  std::vector<Vector> xi;
  std::vector<Vector> phi;
  std::vector<Vector> eta;        // empty when no internal map configured
  std::vector<Vector> delta_phi;  // phi - Gamma mu
  std::vector<char> intervened;
  std::vector<char> relaxed_clf;
  double dt = 0.0;
  double horizon = 0.0;
  bool aborted = false;                   // plant turned non-finite mid-run
  std::optional<double> stop_time;        // blowup early-stop time

  std::size_t size() const { return times.size(); }
};

/// Integrates the plant under the policy with fixed-step RK4 and zero-order
/// hold. Stops early once the state norm passes opts.blowup; truncates and
/// marks the trajectory aborted if the plant evaluates non-finite. Policy
/// errors are rethrown as PolicyError with the step index attached.
Trajectory simulate(const Plant& plant, const Policy& policy, const Probes& probes,
                    const Vector& x0, const SimOptions& opts);

enum class Classification { Bounded, Diverged, Unsafe, Incomplete };

struct ClassifyOptions {
  double safety_tol = 1e-6;
  double blowup = 1e4;
  double settle_tol = 1e-3;
  // Drift watch on |eta_1|, for plants whose internal state can creep away
  // without tripping the blowup threshold. Infinity disables it.
  double drift_threshold = std::numeric_limits<double>::infinity();
};

struct Verdict {
  Classification classification = Classification::Incomplete;
  double min_h = 0.0;
  double max_state_norm = 0.0;
  double saturation_fraction = 0.0;  // fraction of steps with mu <= 1e-6
  Vector final_state;
  std::optional<double> divergence_time;
  bool drift = false;
  bool settled = false;
};

/// Deterministic trajectory classification with precedence
/// Unsafe > Diverged > Incomplete > Bounded.
Verdict classify(const Trajectory& traj, const ClassifyOptions& opts);

const char* to_string(Classification c);

/// Per-sample error delta_phi(t) = phi(t) - Gamma mu(t).
std::vector<Vector> error_signal(const Trajectory& traj, const GammaSpec& spec);

}  // namespace cbfmp
