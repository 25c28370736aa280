#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace harqnc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr std::string_view kVersion = "0.1.0";

/// Encoder switching decision: send the fresh estimate or resend the pending one.
enum class Decision { Tx, Rtx };

inline std::string_view to_string(Decision d) { return d == Decision::Tx ? "TX" : "RTX"; }

/// Acknowledged outcome of the previous step, as seen by both ends of the link.
struct Ack {
  Decision u = Decision::Tx;
  int gamma = 0;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed scenario document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input that parses but breaks a model rule (dimensions, definiteness, ranges).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Request outside what an operation supports (e.g. DP on a non-scalar plant).
class UnsupportedError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Singular or badly conditioned factorization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Cross-module protocol or invariant violation detected at run time.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace harqnc
