#pragma once

#include <stdexcept>
#include <string>

namespace gpcl {

/// Malformed or inconsistent input data (files, schedules, quotes).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A computation failed to produce a usable number.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace gpcl
