#pragma once

#include <stdexcept>
#include <string>

namespace shelab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: exit code 2 at the command line.
class ConfigurationError : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };
class ContractViolation : public Error { public: using Error::Error; };

// Numerical failures: exit code 3.
class NumericalError : public Error { public: using Error::Error; };
class SolvabilityError : public NumericalError { public: using NumericalError::NumericalError; };
class DegenerateKernelError : public NumericalError { public: using NumericalError::NumericalError; };
class NeutralityError : public NumericalError { public: using NumericalError::NumericalError; };
class StepSizeError : public NumericalError { public: using NumericalError::NumericalError; };
class PositivityError : public NumericalError { public: using NumericalError::NumericalError; };
class SingularPointError : public NumericalError { public: using NumericalError::NumericalError; };

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ContractViolation(what);
}

}  // namespace shelab
