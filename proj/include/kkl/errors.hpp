#pragma once

#include <stdexcept>
#include <string>

namespace kkl {

// Configuration / contract violations (CLI exit code 2).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures: singular systems, non-finite losses (CLI exit code 3).
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an ODE trajectory produces a non-finite state or leaves the
// guard box. Carries the step index at which integration was abandoned.
// Data generation catches this to discard the offending initial condition.
struct integration_diverged : numeric_error {
    integration_diverged(const std::string& what, long step)
        : numeric_error(what + " at step " + std::to_string(step)), step_index(step) {}
    long step_index;
};

}  // namespace kkl
