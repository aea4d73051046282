#pragma once

#include <stdexcept>
#include <string>

namespace iie {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidInput : Error {
  using Error::Error;
};
struct DegenerateJacobian : Error {
  using Error::Error;
};
struct NonPSDMetric : Error {
  using Error::Error;
};
struct DisconnectedGraph : Error {
  using Error::Error;
};
struct InsufficientSamples : Error {
  using Error::Error;
};
struct DegenerateArray : Error {
  using Error::Error;
};
struct IllConditioned : Error {
  using Error::Error;
};
struct TrainingDiverged : Error {
  explicit TrainingDiverged(const std::string& msg, int epoch_index)
      : Error(msg), epoch(epoch_index) {}
  int epoch;
};
struct DegenerateAlignment : Error {
  using Error::Error;
};
struct SplitFailed : Error {
  using Error::Error;
};
struct IOError : Error {
  using Error::Error;
};

}  // namespace iie
