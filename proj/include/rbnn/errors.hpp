#pragma once

#include <stdexcept>
#include <string>

namespace rbnn {

// Error categories map onto the CLI exit codes: config -> 1, data -> 2, io -> 3.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by freeze_and_recycle when no recyclable bits remain; the recursion
// controller treats it as a terminal condition.
struct BudgetExhausted : std::runtime_error {
    explicit BudgetExhausted(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rbnn
