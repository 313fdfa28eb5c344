#pragma once

#include <stdexcept>
#include <string>

namespace wms {

/// Base error for every precondition or I/O failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a computed quantity breaks an internal invariant
/// (e.g. a zero row in a transition matrix). Indicates a bug, not bad input.
class InvariantError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(what);
}

}  // namespace detail
}  // namespace wms
