#pragma once

#include <stdexcept>
#include <string>

namespace kcrec {

// Single exception type for contract violations and runtime failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kcrec
