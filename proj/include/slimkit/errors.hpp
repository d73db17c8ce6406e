#pragma once

#include <stdexcept>
#include <string>

namespace slim {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Missing, stale or mismatched state (caches, plans, checkpoints).
class StateError : public Error {
 public:
  using Error::Error;
};

/// A non-finite loss or gradient was produced during training.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch = -1, long step = -1)
      : Error(what), epoch_(epoch), step_(step) {}
  int epoch() const noexcept { return epoch_; }
  long step() const noexcept { return step_; }

 private:
  int epoch_;
  long step_;
};

/// Surgery was requested for a plan that removes every channel of a layer.
class OverPrunedError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace slim
