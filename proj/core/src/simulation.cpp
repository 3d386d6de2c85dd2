#include "cbfmp/simulation.hpp"

#include <algorithm>
#include <cmath>

namespace cbfmp {

Trajectory simulate(const Plant& plant, const Policy& policy, const Probes& probes,
                    const Vector& x0, const SimOptions& opts) {
  if (!(opts.dt > 0.0)) throw Error("simulate: dt must be positive");
  if (!x0.allFinite()) throw Error("simulate: x0 must be finite");

  const long steps = std::lround(opts.horizon / opts.dt);
  Trajectory traj;
  traj.dt = opts.dt;
  traj.horizon = opts.horizon;
  const std::size_t expected = static_cast<std::size_t>(steps) + 1;
  traj.times.reserve(expected);
  traj.states.reserve(expected);
  traj.inputs.reserve(expected);
  traj.mu.reserve(expected);

  Vector x = x0;
  for (long i = 0;; ++i) {
    const double t = static_cast<double>(i) * opts.dt;

    FilterDecision decision;
    try {
      decision = policy(x, t);
    } catch (const Error& e) {
      throw PolicyError(static_cast<std::size_t>(i), e.what());
    }

    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.inputs.push_back(decision.u);
    traj.mu.push_back(decision.mu);
    traj.intervened.push_back(decision.intervened ? 1 : 0);
    traj.relaxed_clf.push_back(decision.relaxed_clf ? 1 : 0);
    if (probes.chain != nullptr) {
      traj.h.push_back(probes.chain->lfh[0](x));
      const Vector xi = eval_xi(*probes.chain, x);
      traj.xi.push_back(xi);
      if (probes.spec != nullptr) {
        const Vector phi = probes.spec->T * xi;
        traj.phi.push_back(phi);
        traj.delta_phi.push_back(phi - probes.spec->Gamma * decision.mu);
      }
    }
    if (probes.internal_map) traj.eta.push_back(probes.internal_map(x));

    if (x.cwiseAbs().maxCoeff() > opts.blowup) {
      traj.stop_time = t;
      break;
    }
    if (i == steps) break;

    const Vector u = decision.u;
    const auto field = [&plant, &u](const Vector& state, double) {
      return (plant.f(state) + plant.g(state) * u).eval();
    };
    try {
      x = rk4_step(field, x, t, opts.dt);
    } catch (const NonFiniteState&) {
      traj.aborted = true;
      break;
    } catch (const NonFinite&) {
      traj.aborted = true;
      break;
    }
  }
  return traj;
}

Verdict classify(const Trajectory& traj, const ClassifyOptions& opts) {
  if (traj.size() == 0) throw Error("classify: empty trajectory");

  Verdict v;
  v.final_state = traj.states.back();

  double min_h = std::numeric_limits<double>::infinity();
  for (double h : traj.h) min_h = std::min(min_h, h);
  v.min_h = traj.h.empty() ? 0.0 : min_h;

  double max_norm = 0.0;
  std::optional<double> blowup_time;
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const double norm = traj.states[i].cwiseAbs().maxCoeff();
    max_norm = std::max(max_norm, norm);
    if (!blowup_time && norm > opts.blowup) blowup_time = traj.times[i];
  }
  v.max_state_norm = max_norm;

  std::size_t saturated = 0;
  for (double mu : traj.mu) {
    if (mu <= 1e-6) ++saturated;
  }
  v.saturation_fraction = static_cast<double>(saturated) / static_cast<double>(traj.size());

  std::optional<double> drift_time;
  if (std::isfinite(opts.drift_threshold) && !traj.eta.empty()) {
    for (std::size_t i = 0; i < traj.eta.size(); ++i) {
      if (std::abs(traj.eta[i](0)) > opts.drift_threshold) {
        drift_time = traj.times[i];
        break;
      }
    }
  }
  v.drift = drift_time.has_value();

  const bool unsafe = !traj.h.empty() && v.min_h < -opts.safety_tol;
  const bool diverged = blowup_time.has_value() || drift_time.has_value();
  if (diverged) {
    if (blowup_time && drift_time) {
      v.divergence_time = std::min(*blowup_time, *drift_time);
    } else {
      v.divergence_time = blowup_time ? blowup_time : drift_time;
    }
  }

  if (unsafe) {
    v.classification = Classification::Unsafe;
  } else if (diverged) {
    v.classification = Classification::Diverged;
  } else if (traj.aborted) {
    v.classification = Classification::Incomplete;
  } else {
    v.classification = Classification::Bounded;
    const long back = std::lround(1.0 / traj.dt);
    if (back > 0 && static_cast<std::size_t>(back) < traj.size()) {
      const Vector& last = traj.states.back();
      const Vector& earlier = traj.states[traj.size() - 1 - static_cast<std::size_t>(back)];
      v.settled = (last - earlier).cwiseAbs().maxCoeff() < opts.settle_tol;
    }
  }
  return v;
}

const char* to_string(Classification c) {
  switch (c) {
    case Classification::Bounded: return "bounded";
    case Classification::Diverged: return "diverged";
    case Classification::Unsafe: return "unsafe";
    case Classification::Incomplete: return "incomplete";
  }
  return "unknown";
}

std::vector<Vector> error_signal(const Trajectory& traj, const GammaSpec& spec) {
  if (traj.phi.size() != traj.mu.size()) {
    throw Error("error_signal: trajectory lacks phi/mu records");
  }
  std::vector<Vector> delta(traj.phi.size());
  for (std::size_t i = 0; i < traj.phi.size(); ++i) {
    delta[i] = traj.phi[i] - spec.Gamma * traj.mu[i];
  }
  return delta;
}

}  // namespace cbfmp
