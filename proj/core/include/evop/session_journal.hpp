#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "evop/common.hpp"
#include "evop/session.hpp"

namespace evop {

/// The persistent Active Sessions cache: an append-only journal of session
/// mutations. Each record is length-prefixed and checksummed so a torn tail
/// is detected and recovery proceeds from the longest valid prefix.
///
/// Layout: a text header line, then binary records of
///   u32 record_len | payload bytes | u32 crc32(payload)
/// with little-endian integers. Payloads are single text lines.
class SessionJournal {
 public:
  static constexpr std::string_view kHeader = "evop-sessions v1\n";

  /// In-memory journal (the simulation's durable store).
  SessionJournal();

  /// File-backed journal; appends are flushed per record. Loads nothing by
  /// itself — use replay_file() to read existing contents first.
  explicit SessionJournal(std::string path);

  void append_session(const Session& session);
  void append_next_seq(std::uint64_t next_session_seq);

  /// Rewrites the journal as a compact snapshot of the live sessions.
  void compact(const std::map<std::string, Session>& sessions,
               std::uint64_t next_session_seq);

  const std::string& bytes() const noexcept { return bytes_; }
  std::size_t size() const noexcept { return bytes_.size(); }

  struct Recovery {
    std::map<std::string, Session> sessions;  // latest state, closed included
    std::uint64_t next_session_seq = 1;
    std::size_t records = 0;
    bool truncated = false;
    std::size_t valid_bytes = 0;
    std::string truncation_note;
  };

  /// Replays journal bytes. Throws CorruptCache only when the header itself
  /// is unusable; a torn or corrupt tail yields truncated=true instead.
  static Recovery replay(std::string_view bytes);
  static Recovery replay_file(const std::string& path);

 private:
  void append_record(const std::string& payload);

  std::string bytes_;
  std::optional<std::string> path_;
};

}  // namespace evop
