#include "evop/trace.hpp"

namespace evop {

void TraceSink::emit(VirtualTime at, std::string_view kind,
                     std::string_view subject, std::string_view detail) {
  std::string line;
  line.reserve(24 + kind.size() + subject.size() + detail.size());
  line += std::to_string(at);
  line += '\t';
  line += kind;
  line += '\t';
  line += subject;
  line += '\t';
  line += detail;
  hash_.update(line);
  hash_.update("\n");
  lines_.push_back(std::move(line));
}

std::string TraceSink::text() const {
  std::string out;
  for (const auto& line : lines_) {
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace evop
