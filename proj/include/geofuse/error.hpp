#pragma once

#include <stdexcept>
#include <string>

namespace geofuse {

// Every recoverable failure in the library surfaces as this type; the CLI maps
// it to a nonzero exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace geofuse
