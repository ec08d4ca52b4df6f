#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sharplab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration, dimension mismatch or violated precondition.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite arithmetic. Carries the optimizer iteration when known (-1 otherwise).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what, std::int64_t iteration = -1)
        : Error(iteration >= 0 ? what + " (iteration " + std::to_string(iteration) + ")" : what),
          message_(what),
          iteration_(iteration) {}

    std::int64_t iteration() const noexcept { return iteration_; }
    const std::string& message() const noexcept { return message_; }

    NumericError at_iteration(std::int64_t iteration) const { return NumericError(message_, iteration); }

private:
    std::string message_;
    std::int64_t iteration_;
};

/// Internal ordering contract broken (e.g. reusing a PSF before one was sampled).
class ContractError : public Error {
public:
    using Error::Error;
};

}  // namespace sharplab
