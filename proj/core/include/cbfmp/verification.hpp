#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cbfmp::verify {

struct SuiteResult {
  std::string name;
  bool pass = false;
  int cases = 0;
  std::string detail;  // counterexample description on failure
};

/// Test-only mutation hook: flips every Hurwitz verdict the suites compute,
/// so a healthy build must turn red under it.
struct Hooks {
  bool negate_routh = false;
};

SuiteResult suite_gamma_norm_bound(std::uint64_t seed, int cases = 1000, const Hooks& = {});
SuiteResult suite_lyapunov_residual(std::uint64_t seed, int cases = 200, const Hooks& = {});
SuiteResult suite_qp_kkt(std::uint64_t seed, int cases = 500, const Hooks& = {});
SuiteResult suite_min_phase_equivalence(std::uint64_t seed, int cases = 200,
                                        const Hooks& = {});

/// Runs all randomized property suites with one seed.
std::vector<SuiteResult> run_all_suites(std::uint64_t seed, const Hooks& = {});

}  // namespace cbfmp::verify
