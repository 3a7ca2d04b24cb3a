#pragma once

#include <stdexcept>
#include <string>

namespace fbsde {

/// Base class for every error raised by the library. Carries the name of the
/// module that raised it so the CLI can report it verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& message)
        : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

/// Bad input: dimensions, ranges, configuration values.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A computation produced NaN/Inf, overflowed, or hit an unrecoverable
/// linear-algebra failure.
class NumericalError : public Error {
public:
    using Error::Error;
};

inline void require(bool condition, const char* module, const std::string& message) {
    if (!condition) throw InvalidArgument(module, message);
}

}  // namespace fbsde
