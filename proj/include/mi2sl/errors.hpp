#ifndef MI2SL_ERRORS_HPP
#define MI2SL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mi2sl {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user input: invalid parameters, malformed files, dimension mismatches.
struct InvalidParameterError : Error {
  using Error::Error;
};

// Numerical failure: rank deficiency, singular systems, degenerate statistics.
struct NumericalError : Error {
  using Error::Error;
};

struct RankError : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace mi2sl

#endif
