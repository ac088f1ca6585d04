#pragma once

#include <stdexcept>
#include <string>

namespace cuerank {

enum class ErrorCode {
    invalid_argument = 1,
    dimension_mismatch = 2,
    io = 3,
    parse = 4,
    singular_covariance = 5,
    config = 6,
    missing_data = 7,
    internal = 8,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace cuerank
