#pragma once

#include <functional>
#include <string>
#include <vector>

#include "arbsr/tensor.hpp"

namespace arbsr {

/// One probed coordinate of a finite-difference comparison.
struct GradProbe {
    std::string param;
    std::int64_t index = 0;
    real analytic = 0;
    real numeric = 0;
    real rel = 0;
};

struct GradReport {
    std::int64_t checked = 0;
    real max_rel = 0;
    GradProbe worst;

    bool pass(real tol) const { return checked > 0 && max_rel <= tol; }
};

/// |a - n| over max(|a|, |n|, 1e-8).
real rel_err(real a, real n);

/// Central-difference check. `compute_grads` must zero and refill each
/// parameter's gradient from the current values; `loss` evaluates the same
/// scalar without touching gradients. Every coordinate is probed unless
/// max_per_param caps it, in which case an evenly strided subset is used
/// so runs stay reproducible.
GradReport grad_check(const std::vector<Parameter*>& params,
                      const std::function<real()>& loss,
                      const std::function<void()>& compute_grads,
                      real h = real(1e-6), std::int64_t max_per_param = 0);

}  // namespace arbsr
