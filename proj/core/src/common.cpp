#include "evop/common.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace evop {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::UnknownImage: return "UnknownImage";
    case ErrorCode::UnknownProvider: return "UnknownProvider";
    case ErrorCode::UnknownInstance: return "UnknownInstance";
    case ErrorCode::AlreadyTerminated: return "AlreadyTerminated";
    case ErrorCode::NotRunning: return "NotRunning";
    case ErrorCode::PastEvent: return "PastEvent";
    case ErrorCode::ModelConflict: return "ModelConflict";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::AlreadyClosed: return "AlreadyClosed";
    case ErrorCode::TargetNotRunning: return "TargetNotRunning";
    case ErrorCode::PlacementFailed: return "PlacementFailed";
    case ErrorCode::ModelNotServed: return "ModelNotServed";
    case ErrorCode::MalformedRequest: return "MalformedRequest";
    case ErrorCode::CorruptCache: return "CorruptCache";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::UnreadableTrace: return "UnreadableTrace";
  }
  return "UnknownError";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail),
      code_(code) {}

std::string Fnv1a64::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(state_));
  return buf;
}

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) {
      c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    }
    table[i] = c;
  }
  return table;
}

}  // namespace

std::uint32_t crc32(std::string_view bytes) {
  static const auto table = make_crc_table();
  std::uint32_t c = 0xffffffffu;
  for (unsigned char b : bytes) {
    c = table[(c ^ b) & 0xffu] ^ (c >> 8);
  }
  return c ^ 0xffffffffu;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(sep, start);
    if (end == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      break;
    }
    out.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string_view trim(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t' ||
                           text.front() == '\r')) {
    text.remove_prefix(1);
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' ||
                           text.back() == '\r')) {
    text.remove_suffix(1);
  }
  return text;
}

bool split_kv(std::string_view token, std::string& key, std::string& value) {
  auto eq = token.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    return false;
  }
  key = std::string(token.substr(0, eq));
  value = std::string(token.substr(eq + 1));
  return true;
}

std::uint64_t parse_u64(std::string_view text, const std::string& what) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    raise(ErrorCode::ParseError, what + ": expected unsigned integer, got '" +
                                     std::string(text) + "'");
  }
  return value;
}

double parse_fraction(std::string_view text, const std::string& what) {
  std::string buf(text);
  char* end = nullptr;
  double value = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || buf.empty()) {
    raise(ErrorCode::ParseError,
          what + ": expected number, got '" + buf + "'");
  }
  return value;
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s(buf);
  auto dot = s.find('.');
  if (dot != std::string::npos) {
    auto last = s.find_last_not_of('0');
    if (last == dot) {
      last -= 1;
    }
    s.erase(last + 1);
  }
  return s;
}

}  // namespace evop
