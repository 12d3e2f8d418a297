#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bfc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Grid too coarse, or a result that moved too much on refinement.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

// Input outside the regime a model or closed form is valid for.
class RegimeError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  ResourceError(const std::string& what, double suggested_samples_per_linewidth)
      : Error(what), suggested(suggested_samples_per_linewidth) {}
  double suggested;
};

class AliasingError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, double bound) : Error(what), bound(bound) {}
  double bound;  // estimated missing area
};

class GridError : public Error {
 public:
  using Error::Error;
};

class NoDataError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class DegenerateDetuning : public Error {
 public:
  using Error::Error;
};

class FilterClipping : public Error {
 public:
  FilterClipping(const std::string& what, double loss) : Error(what), loss(loss) {}
  double loss;
};

class UnsupportedError : public Error {
 public:
  UnsupportedError(const std::string& what, double best_effort)
      : Error(what), best_effort(best_effort) {}
  double best_effort;
};

class FitError : public Error {
 public:
  FitError(const std::string& what, double gamma, double delta_omega, double residual)
      : Error(what), gamma(gamma), delta_omega(delta_omega), residual(residual) {}
  double gamma;
  double delta_omega;
  double residual;
};

class AmbiguityError : public Error {
 public:
  AmbiguityError(const std::string& what, std::vector<double> candidates)
      : Error(what), candidates(std::move(candidates)) {}
  std::vector<double> candidates;  // delays of the competing maxima (s)
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace bfc
