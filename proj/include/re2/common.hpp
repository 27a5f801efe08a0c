#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace re2 {

using NodeId = std::int32_t;
using Token = std::int32_t;

inline constexpr NodeId kNoNode = -1;

// Human-readable marker emitted for resolve outcomes in text trace dumps.
inline constexpr const char* kResolveMarker = "It's better to redo the question.";

// Base error for everything thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration or parameter combination (CLI exit code 2).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Checkpoint/world mismatch (CLI exit code 3).
class IncompatibleError : public Error {
 public:
  explicit IncompatibleError(const std::string& what) : Error(what) {}
};

// A trajectory that does not describe a valid walk through a world.
class MalformedTrajectoryError : public Error {
 public:
  explicit MalformedTrajectoryError(const std::string& what) : Error(what) {}
};

// Querying a token that is not legal at a node.
class MaskedTokenError : public Error {
 public:
  explicit MaskedTokenError(const std::string& what) : Error(what) {}
};

// Batch data whose recorded behavior log-probs no longer match the snapshot.
class StaleBatchError : public Error {
 public:
  explicit StaleBatchError(const std::string& what) : Error(what) {}
};

}  // namespace re2
