#pragma once

#include <stdexcept>
#include <string>

namespace gknet {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: broken model invariants, non-finite inputs, bad config.
class InvalidInput : public Error {
  public:
    using Error::Error;
};

/// A parameter outside the support of its prior.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// log X_i or log f_i requested for a nonpositive value.
class UndefinedLikelihood : public Error {
  public:
    using Error::Error;
};

class ParseError : public Error {
  public:
    using Error::Error;
};

/// A linear design whose response has zero variance.
class DegenerateDesign : public Error {
  public:
    using Error::Error;
};

class SolverError : public Error {
  public:
    SolverError(const std::string& what, double worst_residual)
        : Error(what), worst_residual_(worst_residual) {}
    double worst_residual() const { return worst_residual_; }

  private:
    double worst_residual_;
};

}  // namespace gknet
