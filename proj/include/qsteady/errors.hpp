#pragma once

#include <stdexcept>
#include <string>

namespace qsteady {

// Bad user input: malformed files, dimension mismatches, invalid parameters.
struct InputError : std::invalid_argument {
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// An internal post-condition failed (e.g. a reconstruction contract); the
// computed result cannot be trusted and is not returned.
struct VerificationError : std::runtime_error {
  explicit VerificationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qsteady
