#pragma once

#include <stdexcept>
#include <string>

namespace hybkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// vehicle
class NonPositiveSpeed : public Error {
 public:
  using Error::Error;
};
class SaturatedInversion : public Error {
 public:
  using Error::Error;
};

// grid generation
class SizeOverflow : public Error {
 public:
  using Error::Error;
};
class SteadyStateNotFound : public Error {
 public:
  using Error::Error;
};
class RejectionStalled : public Error {
 public:
  using Error::Error;
};
class EmptyResult : public Error {
 public:
  using Error::Error;
};

// metrics / fitting
class DegenerateGrid : public Error {
 public:
  using Error::Error;
};
class LengthMismatch : public Error {
 public:
  using Error::Error;
};
class SizeShrink : public Error {
 public:
  using Error::Error;
};

// solvers
class NumericalBreakdown : public Error {
 public:
  using Error::Error;
};
class AllStartsFailed : public Error {
 public:
  using Error::Error;
};

// io
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hybkit
