#pragma once

#include <stdexcept>
#include <string>

namespace jaffnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value, unknown key, or inconsistent settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor or image shapes that do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Missing, unpaired, or unreadable dataset files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Corrupt, truncated, or incompatible checkpoint files.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace jaffnet
