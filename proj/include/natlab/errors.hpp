#pragma once

#include <stdexcept>
#include <string>

namespace natlab {

/// Malformed or inconsistent input data (bad matrices, dimension
/// mismatches, unparsable scenario files, resource caps exceeded).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A computation that started from valid input failed to reach its
/// accuracy or convergence target (solver stall, quadrature
/// non-convergence, degenerate geometry detected at runtime).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace natlab
