#pragma once

#include <stdexcept>
#include <string>

namespace rsmdp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input that parses but violates a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Iteration failed to converge or a solver lost precision.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Problem too large for a brute-force routine.
class GuardError : public Error {
public:
    using Error::Error;
};

}  // namespace rsmdp
