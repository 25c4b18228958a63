#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evop {

// Virtual time in whole seconds. All delays and durations are integral so
// that replays are bit-identical.
using VirtualTime = std::uint64_t;
using Duration = std::uint64_t;

enum class ErrorCode {
  CapacityExceeded,
  UnknownImage,
  UnknownProvider,
  UnknownInstance,
  AlreadyTerminated,
  NotRunning,
  PastEvent,
  ModelConflict,
  UnknownModel,
  UnknownSession,
  AlreadyClosed,
  TargetNotRunning,
  PlacementFailed,
  ModelNotServed,
  MalformedRequest,
  CorruptCache,
  ParseError,
  ValidationError,
  UnreadableTrace,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

// FNV-1a, used for trace hashing. Stable across platforms.
class Fnv1a64 {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }

  std::uint64_t digest() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint32_t crc32(std::string_view bytes);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

// Parses "key=value" tokens used by the line-oriented file formats.
bool split_kv(std::string_view token, std::string& key, std::string& value);

std::uint64_t parse_u64(std::string_view text, const std::string& what);
double parse_fraction(std::string_view text, const std::string& what);

// Prints doubles with no trailing zeros ("2", "0.25", "1.5").
std::string format_number(double value);

}  // namespace evop
