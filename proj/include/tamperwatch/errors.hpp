#pragma once

#include <stdexcept>
#include <string>

namespace tamperwatch {

/// Invalid or unsatisfiable configuration (bad config file, impossible schedule, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Frame ingestion failure; the message names the offending file.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or unreadable input.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value where a finite one is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Loss divergence during training; carries the epoch and window it occurred at.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& msg, int epoch, int window)
      : NumericError(msg + " (epoch " + std::to_string(epoch) + ", window " +
                     std::to_string(window) + ")"),
        epoch(epoch),
        window(window) {}
  int epoch;
  int window;
};

/// Mismatch between cached intermediates and the structures they were built from.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace tamperwatch
