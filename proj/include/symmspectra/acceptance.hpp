// The built-in acceptance suite: ten numbered end-to-end criteria covering
// the closed-form limits, the inverted density, the regular-endpoint blocks,
// atom extraction, the analytic identity suite, the resolvent, the transform
// round trip, admissibility, completion invariance, and the Nevanlinna pair
// machinery. Shared by the CLI selftest command and the test runner.
#pragma once

#include <string>
#include <vector>

#include "symmspectra/types.hpp"

namespace symmspectra {

struct CriterionResult {
  int index = 0;
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  std::string detail;  // measured worst-case numbers; deterministic
};

// Runs all criteria in order with the given tolerance set. An empty epsilon
// schedule selects the library default for the density inversion. Criteria
// with a stated runtime budget fail when they exceed it. Exceptions inside a
// criterion mark it failed with the message in the detail field.
std::vector<CriterionResult> run_acceptance(
    const Tolerances& tol, const std::vector<double>& eps_schedule = {});

}  // namespace symmspectra
