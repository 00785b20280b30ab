#pragma once

#include <stdexcept>
#include <string>

namespace deeplde {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class PartitionNotFound : public Error {
 public:
  using Error::Error;
};

class NewtonDiverged : public Error {
 public:
  using Error::Error;
};

class Diverged : public Error {
 public:
  using Error::Error;
};

class OracleFailed : public Error {
 public:
  using Error::Error;
};

class MixedMethods : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Inconsistent command-line flags detected after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace deeplde
