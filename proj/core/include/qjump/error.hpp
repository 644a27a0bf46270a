#pragma once

#include <stdexcept>
#include <string>

namespace qjump {

// Two families: bad input (exit code 2 at the CLI) and numerical failure
// (exit code 3). Every concrete error derives from exactly one of them.

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteInput : public InputError {
 public:
  using InputError::InputError;
};

class AdiabaticityViolation : public InputError {
 public:
  using InputError::InputError;
};

class EmptyHistogram : public InputError {
 public:
  using InputError::InputError;
};

class GridMismatch : public InputError {
 public:
  using InputError::InputError;
};

class WindowOverflow : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class IntegrationDivergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateGenerator : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularNormalMatrix : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace qjump
