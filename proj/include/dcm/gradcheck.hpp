#pragma once

#include <string>
#include <vector>

namespace dcm {

struct GradCaseResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

/// Checks analytic gradients against central finite differences for every
/// primitive operation and for complete models (feature net plus every head
/// configuration) differentiated through the training loss. `inject_fault`
/// perturbs the analytic gradient of the first case so the harness can be
/// shown to catch a wrong gradient.
std::vector<GradCaseResult> run_gradcheck_suite(double tolerance = 1e-5,
                                                bool inject_fault = false);

bool all_passed(const std::vector<GradCaseResult>& results);

}  // namespace dcm
