#pragma once

#include <stdexcept>
#include <string>

namespace simlab {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class EigenFailure : public Error {
 public:
  using Error::Error;
};

class StepTooLarge : public Error {
 public:
  using Error::Error;
};

class NonPositiveWeight : public Error {
 public:
  using Error::Error;
};

class SingularInformation : public Error {
 public:
  using Error::Error;
};

class SingularCovariance : public Error {
 public:
  using Error::Error;
};

class SingularLocalInformation : public Error {
 public:
  using Error::Error;
};

class NonConvexLocal : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  explicit Infeasible(const std::string& what, double limit = 0.0)
      : Error(what), limit_value(limit) {}
  double limit_value;  // e.g. the minimum attainable MSE bound
};

class Overflow : public Error {
 public:
  using Error::Error;
};

class QuadratureFailure : public Error {
 public:
  using Error::Error;
};

class NoFixedPoint : public Error {
 public:
  using Error::Error;
};

class RankDeficientBasis : public Error {
 public:
  using Error::Error;
};

class InsufficientNeighbors : public Error {
 public:
  InsufficientNeighbors(int node_, int neighborhood_, int subspace_dim_);
  int node;
  int neighborhood;
  int subspace_dim;
};

class RankDeficit : public Error {
 public:
  using Error::Error;
};

class NoStableStep : public Error {
 public:
  using Error::Error;
};

class NonPositiveMeasurement : public Error {
 public:
  using Error::Error;
};

class DisconnectedTopology : public Error {
 public:
  using Error::Error;
};

class NotSPD : public Error {
 public:
  using Error::Error;
};

class SubproblemStalled : public Error {
 public:
  using Error::Error;
};

class InnerSolverStalled : public Error {
 public:
  using Error::Error;
};

class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace simlab
