#pragma once

#include <stdexcept>
#include <string>

namespace slg {

/// Malformed input: schema violations, invalid coefficients, bad flags.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
    InputError(const std::string& location, const std::string& what)
        : std::runtime_error(location.empty() ? what : location + ": " + what),
          location_(location) {}

    const std::string& location() const noexcept { return location_; }

private:
    std::string location_;
};

/// A numerical procedure failed to converge; carries an error estimate when known.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double estimate = -1.0)
        : std::runtime_error(what), estimate_(estimate) {}

    double estimate() const noexcept { return estimate_; }

private:
    double estimate_;
};

/// An internal consistency check failed (a bug, not bad input).
class InvariantError : public std::logic_error {
public:
    explicit InvariantError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace slg
