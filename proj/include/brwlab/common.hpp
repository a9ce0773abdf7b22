#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace brwlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Error hierarchy.  Exceptions are reserved for contract violations and
// unusable inputs; outcomes that a caller is expected to branch on (no root,
// minimum not attained, undecided classification) are encoded in return
// values instead.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct NotCanonical : Error {
  explicit NotCanonical(const std::string& what) : Error(what) {}
};
struct NotCanonicalizable : Error {
  explicit NotCanonicalizable(const std::string& what) : Error(what) {}
};
struct CapExceeded : Error {
  explicit CapExceeded(const std::string& what) : Error(what) {}
};
struct OutsideDomain : Error {
  explicit OutsideDomain(const std::string& what) : Error(what) {}
};
struct Degenerate : Error {
  explicit Degenerate(const std::string& what) : Error(what) {}
};
struct NoClosedForm : Error {
  explicit NoClosedForm(const std::string& what) : Error(what) {}
};
struct FTableRequired : Error {
  explicit FTableRequired(const std::string& what) : Error(what) {}
};
struct SpanRequired : Error {
  explicit SpanRequired(const std::string& what) : Error(what) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

inline bool close(double a, double b, double tol) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::fabs(a - b) <= tol;
}

inline bool close_rel(double a, double b, double rel) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  const double scale = std::max(std::fabs(a), std::fabs(b));
  return std::fabs(a - b) <= rel * std::max(scale, 1e-300);
}

}  // namespace brwlab
