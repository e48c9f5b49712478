#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by batch oracles when a single item of a batch fails.
class OracleItemError : public Error {
 public:
  OracleItemError(std::size_t index, const std::string& what) : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace mtkit
