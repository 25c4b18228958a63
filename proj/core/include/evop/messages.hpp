#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>

#include "evop/common.hpp"

namespace evop {

enum class UpdateReason { Initial, DegradationReplacement, Rebalance, ReverseMigration };

std::string_view to_string(UpdateReason reason);
UpdateReason update_reason_from_string(std::string_view text);

/// One frame on the client<->broker control channel. Frames travel as UTF-8
/// text, one JSON object each; this struct is the decoded form.
struct Frame {
  enum class Type { Hello, Bye, Ping, Assign, Update, Error };

  Type type = Type::Hello;
  std::string model_id;    // HELLO
  std::string session_id;  // BYE, PING, ASSIGN, UPDATE
  std::string address;     // ASSIGN, UPDATE
  std::uint64_t epoch = 0; // ASSIGN, UPDATE
  UpdateReason reason = UpdateReason::Initial;  // UPDATE
  std::string code;        // ERROR
  std::string detail;      // ERROR
};

std::string_view to_string(Frame::Type type);

std::string encode_frame(const Frame& frame);
Frame decode_frame(const std::string& text);

/// Broker-side handle for one connected client. Frames are encoded on send,
/// so the wire format is exercised on every message.
class ClientChannel {
 public:
  using Deliver = std::function<void(const std::string& encoded_frame)>;

  explicit ClientChannel(Deliver deliver) : deliver_(std::move(deliver)) {}

  void send(const Frame& frame) { deliver_(encode_frame(frame)); }

 private:
  Deliver deliver_;
};

}  // namespace evop
