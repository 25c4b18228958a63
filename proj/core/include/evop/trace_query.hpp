#pragma once

#include <map>
#include <string>
#include <vector>

#include "evop/common.hpp"

namespace evop {

/// A parsed trace line: timestamp, kind, subject, and the detail field
/// broken into key=value pairs (bare words land under themselves).
struct TraceEvent {
  VirtualTime at = 0;
  std::string kind;
  std::string subject;
  std::string detail;
  std::map<std::string, std::string> fields;
};

TraceEvent parse_trace_line(const std::string& line);
std::vector<TraceEvent> parse_trace(const std::vector<std::string>& lines);

}  // namespace evop
