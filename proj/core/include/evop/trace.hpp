#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "evop/common.hpp"

namespace evop {

/// Collects the event trace: one tab-separated line per processed event or
/// decision (timestamp, kind, subject, detail). The accumulated text is what
/// golden-file comparisons and the trace hash operate on.
class TraceSink {
 public:
  void emit(VirtualTime at, std::string_view kind, std::string_view subject,
            std::string_view detail);

  const std::vector<std::string>& lines() const noexcept { return lines_; }
  std::string text() const;
  std::string hash_hex() const { return hash_.hex(); }

 private:
  std::vector<std::string> lines_;
  Fnv1a64 hash_;
};

}  // namespace evop
