#pragma once

#include <stdexcept>
#include <string>

namespace extr {

// Input/format problems: bad CSV cells, missing columns, empty groups.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical/solver failures: degenerate pairings, negative cycles, non-finite iterates.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace extr
