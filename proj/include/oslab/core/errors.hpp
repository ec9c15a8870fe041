#pragma once

#include <stdexcept>
#include <string>

namespace oslab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public Error { public: using Error::Error; };
class DegenerateBasis : public Error { public: using Error::Error; };
class StepSizeFailure : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class BoundError : public Error { public: using Error::Error; };
class DegeneratePeriod : public Error { public: using Error::Error; };
class BracketFailure : public Error { public: using Error::Error; };
class NonConvexInput : public Error { public: using Error::Error; };
class DegenerateProfile : public Error { public: using Error::Error; };
class AllZeroCounts : public Error { public: using Error::Error; };
class TooFewExceedances : public Error { public: using Error::Error; };
class NoData : public Error { public: using Error::Error; };

class BudgetInfeasible : public Error {
 public:
  BudgetInfeasible(const std::string& what, double achieved_gap)
      : Error(what), achieved_gap_(achieved_gap) {}
  double achieved_gap() const noexcept { return achieved_gap_; }

 private:
  double achieved_gap_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace oslab
