#pragma once

#include <string>
#include <vector>

#include "arbsr/gradcheck.hpp"

namespace arbsr {

/// One checked operation: its report plus the tolerance it must meet.
struct SuiteResult {
    std::string name;
    GradReport report;
    real tol = real(1e-4);

    bool pass() const { return report.pass(tol); }
};

/// Finite-difference checks for every differentiable operation and the
/// assembled network. Only meaningful on the 64-bit build. A nonzero
/// seed_mix re-randomizes the probe data (the default keeps the pinned
/// streams). Not reentrant: the mix is held in suite-local state.
std::vector<SuiteResult> run_gradient_suite(unsigned long long seed_mix = 0);

/// Checker-sensitivity probe: runs a conv case whose backward is scaled
/// by 1.01 and returns the report, which should flag an error near 1e-2.
GradReport corrupted_backward_demo();

}  // namespace arbsr
