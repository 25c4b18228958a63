#include "evop/trace_query.hpp"

namespace evop {

TraceEvent parse_trace_line(const std::string& line) {
  auto columns = split(line, '\t');
  if (columns.size() < 3) {
    raise(ErrorCode::UnreadableTrace, "short trace line: " + line);
  }
  TraceEvent event;
  event.at = parse_u64(columns[0], "trace timestamp");
  event.kind = columns[1];
  event.subject = columns[2];
  if (columns.size() > 3) {
    event.detail = columns[3];
    for (const auto& token : split(event.detail, ' ')) {
      if (token.empty()) continue;
      std::string key, value;
      if (split_kv(token, key, value)) {
        event.fields[key] = value;
      } else {
        event.fields[token] = token;
      }
    }
  }
  return event;
}

std::vector<TraceEvent> parse_trace(const std::vector<std::string>& lines) {
  std::vector<TraceEvent> events;
  events.reserve(lines.size());
  for (const auto& line : lines) {
    if (line.empty()) continue;
    events.push_back(parse_trace_line(line));
  }
  return events;
}

}  // namespace evop
