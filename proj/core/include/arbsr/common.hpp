#pragma once

#include <stdexcept>
#include <string>

namespace arbsr {

// Element precision is fixed per build: 32-bit for training/inference
// builds, 64-bit for gradient-check builds (finite differences need it).
#ifdef ARBSR_PRECISION_F64
using real = double;
#else
using real = float;
#endif

constexpr bool kPrecisionF64 =
#ifdef ARBSR_PRECISION_F64
    true;
#else
    false;
#endif

struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct train_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace arbsr
