#pragma once

#include <stdexcept>
#include <string>

namespace genwave {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error { using Error::Error; };
class StencilError : public Error { using Error::Error; };
class RankError : public Error { using Error::Error; };
class DomainError : public Error {
 public:
  DomainError(const std::string& what, double max_gamma = 0.0)
      : Error(what), max_gamma_(max_gamma) {}
  /// Largest admissible slice time when the lens collapses, else 0.
  double max_gamma() const noexcept { return max_gamma_; }

 private:
  double max_gamma_;
};
class ResolutionError : public Error { using Error::Error; };
class ScenarioError : public Error { using Error::Error; };
class InversionError : public Error { using Error::Error; };
class HyperbolicityError : public Error { using Error::Error; };
class DegenerateNormalError : public Error { using Error::Error; };
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};
class CflError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };
class PreconditionError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace genwave
