#pragma once

#include <stdexcept>
#include <string>

namespace eocntk {

/// Violated precondition: bad shape, out-of-domain argument, inconsistent config.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative routine did not converge. Carries the last iterate so callers
/// can decide whether it is usable.
class NumericFailure : public std::runtime_error {
 public:
  NumericFailure(const std::string& what, double last_iterate)
      : std::runtime_error(what), last_iterate_(last_iterate) {}

  double last_iterate() const noexcept { return last_iterate_; }

 private:
  double last_iterate_;
};

/// A zero-norm activation made a cosine undefined.
class DegenerateInput : public std::domain_error {
 public:
  DegenerateInput(const std::string& what, int layer)
      : std::domain_error(what), layer_(layer) {}

  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

/// An iterated dual map left its codomain (e.g. the inverse cosine distance
/// hit zero cosine distance).
class DivergentMap : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed dataset or configuration file. The message names the record.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eocntk
