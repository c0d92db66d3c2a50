#pragma once

#include <stdexcept>
#include <string>

namespace omar {

// Violated precondition or shape/contract mismatch in library code.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Bad user-supplied configuration or missing prerequisite artifact.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// File format or filesystem failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline void contract_check(bool ok, const std::string& msg) {
  if (!ok) throw ContractError(msg);
}

}  // namespace omar
