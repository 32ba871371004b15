#pragma once

#include <string>
#include <vector>

#include "arbsr/common.hpp"

namespace arbsr {

/// Horizontal / vertical scale factors. The pair conditions every
/// scale-aware layer; r_h applies to width, r_v to height.
struct ScalePair {
    real r_h = 2;
    real r_v = 2;

    bool symmetric() const { return r_h == r_v; }
    std::string str() const;
};

/// Accepts "R" or "RHxRV" with decimal-dot reals, e.g. "2", "1.5",
/// "2.2x4.2". Throws config_error on anything else (including
/// non-positive or non-finite values).
ScalePair parse_scale(const std::string& text);

/// The 30 symmetric training scales 1.1, 1.2, ..., 4.0.
const std::vector<real>& symmetric_scale_grid();

/// The 30 ordered asymmetric pairs drawn from {1.5, 2.0, ..., 4.0}
/// with r_h != r_v.
const std::vector<ScalePair>& asymmetric_scale_grid();

}  // namespace arbsr
