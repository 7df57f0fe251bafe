#pragma once

#include <stdexcept>
#include <string>

namespace metaod {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Annotation has < 3 vertices or rasterizes to an empty mask.
struct DegenerateAnnotationError : Error {
  using Error::Error;
};

// Requested category is absent from the (pruned) pool.
struct MissingCategoryError : Error {
  using Error::Error;
};

// A sampler ran out of attempts without finding a valid placement.
struct PlacementExhaustionError : Error {
  using Error::Error;
};

// Network / subprocess failure after the retry schedule was exhausted.
struct TransportError : Error {
  using Error::Error;
};

// Persistent HTTP 429 after the full backoff schedule.
struct RateLimitError : TransportError {
  using TransportError::TransportError;
};

// Endpoint replied, but the payload does not follow the wire protocol.
struct ProtocolError : Error {
  using Error::Error;
};

// Caller broke a documented precondition.
struct ContractViolation : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace metaod
