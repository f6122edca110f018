#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace osr {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0;
    double seconds = 0;
    std::size_t points = 0;
};

// Pass bound applied by the CLI and the acceptance runner.
inline double gradcheck_tolerance() { return 1e-5; }

// Verifies the autodiff gradients of every loss form against central
// differences, probing each parameter tensor of a small tanh model at
// seeded random points. Points landing near a piecewise boundary of the
// alignment cost (or yielding an empty penalty selection) are redrawn, and
// the penalty selection is held fixed while probing, so every checked
// function is smooth at the checked point.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed,
                                                 std::size_t points = 10);

} // namespace osr
