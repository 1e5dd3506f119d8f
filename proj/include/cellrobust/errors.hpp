#pragma once

#include <stdexcept>
#include <string>

namespace cellrobust {

// Raised for invalid data or numerically degenerate input. The CLI maps it
// to exit code 2; usage errors are handled by the argument parser (exit 1).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cellrobust
