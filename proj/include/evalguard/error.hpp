#pragma once

#include <stdexcept>
#include <string>

namespace evalguard {

// Malformed or inconsistent input data (CLI exit code 2).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure: rank deficiency, non-convergence, degenerate variance
// (CLI exit code 3).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Too many failed replicates in a Monte Carlo study (CLI exit code 4).
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace evalguard
