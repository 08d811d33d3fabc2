#pragma once

#include <stdexcept>
#include <string>

namespace qp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// cf_expand on input whose expansion terminates before the requested depth.
struct RationalInput : Error {
  explicit RationalInput(std::string msg, int depth_reached)
      : Error(std::move(msg)), depth_reached(depth_reached) {}
  int depth_reached;
};

// Decimal input cannot resolve a partial quotient at the requested depth.
struct PrecisionExhausted : Error {
  explicit PrecisionExhausted(std::string msg, int safe_depth)
      : Error(std::move(msg)), safe_depth(safe_depth) {}
  int safe_depth;  // deepest depth at which the expansion is certain
};

struct DepthInsufficient : Error {
  using Error::Error;
};

struct StripExceeded : Error {
  using Error::Error;
};

struct LambdaZero : Error {
  using Error::Error;
};

struct SingularBlock : Error {
  using Error::Error;
};

struct WindowTooSmall : Error {
  using Error::Error;
};

struct Degenerate : Error {
  using Error::Error;
};

struct SelectionViolated : Error {
  using Error::Error;
};

struct TruncationTooSmall : Error {
  using Error::Error;
};

struct SupportTooWide : Error {
  using Error::Error;
};

struct NoConvergence : Error {
  using Error::Error;
};

struct AtomCollision : Error {
  using Error::Error;
};

struct SingularConjugacy : Error {
  using Error::Error;
};

struct DivisorBelowFloor : Error {
  using Error::Error;
};

struct BoundaryInput : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace qp
