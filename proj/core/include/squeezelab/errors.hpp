#pragma once

#include <stdexcept>
#include <string>

namespace squeezelab {

// Violation of a physical precondition or invariant (above-threshold pump,
// negative variance, saturated detector, ...). CLI maps this to exit code 3.
class PhysicsError : public std::runtime_error {
 public:
  explicit PhysicsError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed configuration input (bad JSON, unknown key, wrong type/range).
// CLI maps this to exit code 2.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace squeezelab
