#pragma once

#include <stdexcept>
#include <string>

namespace cmes {

// Factorization or tail-probability failure that jitter and floors could not repair.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Operation invoked in the wrong lifecycle state (e.g. tell before ask).
class StateError : public std::logic_error {
 public:
  explicit StateError(const std::string& what) : std::logic_error(what) {}
};

// Request too large to serve (e.g. a joint draw over too many grid points).
class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

// Operation needs data the problem does not carry (e.g. ground truth for a utility gap).
class UnsupportedProblemError : public std::runtime_error {
 public:
  explicit UnsupportedProblemError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cmes
