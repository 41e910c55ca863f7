#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace qfldp {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// bad user input, unknown tags, inconsistent grids
struct ConfigError : Error {
  using Error::Error;
};

// sites outside a box, missing disorder entries, non-Hermitian input
struct DomainError : Error {
  using Error::Error;
};

struct SingularityError : Error {
  SingularityError(const std::string& what, double pivot)
      : Error(what), smallest_pivot(pivot) {}
  double smallest_pivot;
};

// quadrature or time stepping failed its refinement check
struct AccuracyError : Error {
  AccuracyError(const std::string& what, double change)
      : Error(what), last_change(change) {}
  double last_change;
};

// input data violates a structural invariant (e.g. non-convex curve)
struct DataError : Error {
  using Error::Error;
};

struct ResourceError : Error {
  using Error::Error;
};

}  // namespace qfldp
