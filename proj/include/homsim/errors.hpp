#pragma once

#include <stdexcept>
#include <string>

namespace homsim {

// Bad scenario/experiment configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failure while processing data: fit failure, undefined visibility,
// malformed input (CLI exit code 2).
struct AnalysisError : std::runtime_error {
    explicit AnalysisError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical accuracy check failed (e.g. quadrature grid too coarse).
struct AccuracyError : std::runtime_error {
    explicit AccuracyError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace homsim
