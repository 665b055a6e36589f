#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace despca {

/// Outcome of one numerical check: `worst` is the largest error (or the
/// smallest margin, for lower-bound checks) seen over `instances` cases.
struct CheckResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;
  double tolerance = 0.0;
  int instances = 0;
  bool lower_bound = false;  // worst must be >= tolerance
  std::string detail;
};

/// Solver outputs against independent references: nodewise vs inversion,
/// Fantope at lambda = 0 vs the top eigenprojector, closed-form Theta0 vs
/// inverted Hessian, Fantope projection vs 2x2 brute force.
std::vector<CheckResult> oracle_suite(std::uint64_t seed);

/// Risk derivatives vs finite differences, Hessian spectrum at beta0 and
/// the local convexity bound.
std::vector<CheckResult> property_suite(std::uint64_t seed);

/// KKT certificates of converged nodewise columns and second-step solutions.
std::vector<CheckResult> kkt_suite(std::uint64_t seed);

std::string describe(const CheckResult& r);

}  // namespace despca
