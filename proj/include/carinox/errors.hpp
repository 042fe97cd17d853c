#pragma once

#include <stdexcept>
#include <string>

namespace carinox {

// Base class so callers can catch everything from this library at once.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A call violated its contract: bad node ids, dimension mismatches,
// missing prompt fields, out-of-range indices.
struct contract_error : error {
  using error::error;
};

// A configuration value is invalid: non-positive sizes, bad hyperparameters,
// malformed landscape specs, unknown config keys.
struct config_error : error {
  using error::error;
};

// An operation was evaluated at a point where it is undefined or not
// differentiable (log at zero, l2 norm at the origin, cosine of a zero
// vector, the norm regularizer at the origin).
struct singularity_error : error {
  using error::error;
};

// A computation produced a non-finite value.
struct numeric_error : error {
  using error::error;
};

// An input file could not be parsed.
struct parse_error : error {
  using error::error;
};

}  // namespace carinox
