#pragma once

#include <stdexcept>
#include <string>

namespace cbrw {

// Invalid kernel/catalyst/offspring/config input.
class ModelError : public std::runtime_error {
public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// A numerical routine failed to converge or left its validity domain.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// A required upstream artifact (file handoff) is missing.
class MissingArtifactError : public std::runtime_error {
public:
  explicit MissingArtifactError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cbrw
