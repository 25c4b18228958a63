#include "evop/session_journal.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace evop {

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::Active: return "active";
    case SessionState::Migrating: return "migrating";
    case SessionState::Closed: return "closed";
  }
  return "unknown";
}

SessionState session_state_from_string(std::string_view text) {
  if (text == "active") return SessionState::Active;
  if (text == "migrating") return SessionState::Migrating;
  if (text == "closed") return SessionState::Closed;
  raise(ErrorCode::ParseError, "unknown session state '" + std::string(text) + "'");
}

namespace {

void put_u32(std::string& out, std::uint32_t value) {
  out.push_back(static_cast<char>(value & 0xff));
  out.push_back(static_cast<char>((value >> 8) & 0xff));
  out.push_back(static_cast<char>((value >> 16) & 0xff));
  out.push_back(static_cast<char>((value >> 24) & 0xff));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 3])) << 24);
}

std::string session_payload(const Session& s) {
  std::ostringstream out;
  out << "session " << s.session_id << " model=" << s.model_id
      << " instance=" << s.instance_id << " epoch=" << s.epoch
      << " state=" << to_string(s.state) << " created=" << s.created_at
      << " activity=" << s.last_activity;
  return out.str();
}

Session parse_session_payload(const std::string& payload) {
  auto tokens = split(payload, ' ');
  Session s;
  s.session_id = tokens.at(1);
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    std::string key, value;
    if (!split_kv(tokens[i], key, value)) {
      raise(ErrorCode::ParseError, "bad session attribute '" + tokens[i] + "'");
    }
    if (key == "model") {
      s.model_id = value;
    } else if (key == "instance") {
      s.instance_id = value;
    } else if (key == "epoch") {
      s.epoch = parse_u64(value, "session epoch");
    } else if (key == "state") {
      s.state = session_state_from_string(value);
    } else if (key == "created") {
      s.created_at = parse_u64(value, "session created");
    } else if (key == "activity") {
      s.last_activity = parse_u64(value, "session activity");
    } else {
      raise(ErrorCode::ParseError, "unknown session attribute '" + key + "'");
    }
  }
  return s;
}

// Session ids look like "s-0042"; the numeric tail seeds id uniqueness
// across recovery even when no meta record survives.
std::uint64_t id_sequence(const std::string& session_id) {
  auto dash = session_id.find('-');
  if (dash == std::string::npos) return 0;
  std::uint64_t value = 0;
  for (std::size_t i = dash + 1; i < session_id.size(); ++i) {
    if (session_id[i] < '0' || session_id[i] > '9') return 0;
    value = value * 10 + static_cast<std::uint64_t>(session_id[i] - '0');
  }
  return value;
}

}  // namespace

SessionJournal::SessionJournal() { bytes_ = kHeader; }

SessionJournal::SessionJournal(std::string path) : path_(std::move(path)) {
  bytes_ = kHeader;
  std::ofstream out(*path_, std::ios::binary | std::ios::trunc);
  if (!out) {
    raise(ErrorCode::ValidationError, "cannot open journal file " + *path_);
  }
  out << bytes_;
  out.flush();
}

void SessionJournal::append_record(const std::string& payload) {
  std::string record;
  record.reserve(payload.size() + 8);
  put_u32(record, static_cast<std::uint32_t>(payload.size()));
  record += payload;
  put_u32(record, crc32(payload));
  bytes_ += record;
  if (path_) {
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    out << record;
    out.flush();
  }
}

void SessionJournal::append_session(const Session& session) {
  append_record(session_payload(session));
}

void SessionJournal::append_next_seq(std::uint64_t next_session_seq) {
  append_record("meta next-session-seq=" + std::to_string(next_session_seq));
}

void SessionJournal::compact(const std::map<std::string, Session>& sessions,
                             std::uint64_t next_session_seq) {
  std::string fresh(kHeader);
  bytes_.swap(fresh);
  if (path_) {
    std::ofstream out(*path_, std::ios::binary | std::ios::trunc);
    out << bytes_;
  }
  append_next_seq(next_session_seq);
  for (const auto& [id, session] : sessions) {
    if (session.state == SessionState::Closed) continue;
    append_session(session);
  }
}

SessionJournal::Recovery SessionJournal::replay(std::string_view bytes) {
  Recovery result;
  if (bytes.empty()) {
    return result;  // empty cache, empty state
  }
  if (bytes.size() < kHeader.size()) {
    if (kHeader.substr(0, bytes.size()) == bytes) {
      result.truncated = true;
      result.truncation_note = "journal torn inside header";
      return result;
    }
    raise(ErrorCode::CorruptCache, "journal header mismatch");
  }
  if (bytes.substr(0, kHeader.size()) != kHeader) {
    raise(ErrorCode::CorruptCache, "journal header mismatch");
  }

  std::size_t offset = kHeader.size();
  result.valid_bytes = offset;
  std::uint64_t max_seen_seq = 0;
  while (offset < bytes.size()) {
    if (offset + 4 > bytes.size()) {
      result.truncated = true;
      result.truncation_note = "torn length prefix at byte " + std::to_string(offset);
      break;
    }
    std::uint32_t len = get_u32(bytes, offset);
    if (offset + 4 + len + 4 > bytes.size()) {
      result.truncated = true;
      result.truncation_note = "torn record at byte " + std::to_string(offset);
      break;
    }
    std::string payload(bytes.substr(offset + 4, len));
    std::uint32_t stored = get_u32(bytes, offset + 4 + len);
    if (crc32(payload) != stored) {
      result.truncated = true;
      result.truncation_note = "checksum mismatch at byte " + std::to_string(offset);
      break;
    }
    if (payload.rfind("session ", 0) == 0) {
      auto session = parse_session_payload(payload);
      max_seen_seq = std::max(max_seen_seq, id_sequence(session.session_id));
      result.sessions[session.session_id] = std::move(session);
    } else if (payload.rfind("meta ", 0) == 0) {
      auto tokens = split(payload, ' ');
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        std::string key, value;
        if (split_kv(tokens[i], key, value) && key == "next-session-seq") {
          result.next_session_seq =
              std::max(result.next_session_seq, parse_u64(value, "meta seq"));
        }
      }
    }
    // Unknown payloads are skipped: the format may grow record kinds.
    offset += 4 + len + 4;
    result.valid_bytes = offset;
    result.records += 1;
  }
  result.next_session_seq = std::max(result.next_session_seq, max_seen_seq + 1);
  return result;
}

SessionJournal::Recovery SessionJournal::replay_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::CorruptCache, "cannot read journal file " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return replay(buf.str());
}

}  // namespace evop
