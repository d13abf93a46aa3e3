#pragma once

#include <stdexcept>
#include <string>

namespace harnacklab {

/// Base class for every failure this library reports deliberately.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Misuse of an interface: shape mismatch, bad parameter, wrong variant.
struct ContractViolation : Error {
  using Error::Error;
};

/// Requested step size violates the explicit-integrator stability bound.
struct CflError : Error {
  using Error::Error;
};

/// The round-sphere radius would reach zero inside the requested window.
struct BlowUpRangeError : Error {
  using Error::Error;
};

/// A solution that must stay positive failed to; message carries location.
struct PositivityError : Error {
  using Error::Error;
};

/// Scenario file could not be parsed or validated.
struct ConfigError : Error {
  using Error::Error;
};

/// No constant in the search range makes the requested quantity negative.
struct NoAdmissibleConstant : Error {
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace harnacklab
