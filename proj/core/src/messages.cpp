#include "evop/messages.hpp"

#include <nlohmann/json.hpp>

namespace evop {

using nlohmann::json;

std::string_view to_string(UpdateReason reason) {
  switch (reason) {
    case UpdateReason::Initial: return "initial";
    case UpdateReason::DegradationReplacement: return "degradation_replacement";
    case UpdateReason::Rebalance: return "rebalance";
    case UpdateReason::ReverseMigration: return "reverse_migration";
  }
  return "unknown";
}

UpdateReason update_reason_from_string(std::string_view text) {
  if (text == "initial") return UpdateReason::Initial;
  if (text == "degradation_replacement") return UpdateReason::DegradationReplacement;
  if (text == "rebalance") return UpdateReason::Rebalance;
  if (text == "reverse_migration") return UpdateReason::ReverseMigration;
  raise(ErrorCode::ParseError, "unknown update reason '" + std::string(text) + "'");
}

std::string_view to_string(Frame::Type type) {
  switch (type) {
    case Frame::Type::Hello: return "HELLO";
    case Frame::Type::Bye: return "BYE";
    case Frame::Type::Ping: return "PING";
    case Frame::Type::Assign: return "ASSIGN";
    case Frame::Type::Update: return "UPDATE";
    case Frame::Type::Error: return "ERROR";
  }
  return "UNKNOWN";
}

std::string encode_frame(const Frame& frame) {
  json obj;
  obj["type"] = std::string(to_string(frame.type));
  switch (frame.type) {
    case Frame::Type::Hello:
      obj["model_id"] = frame.model_id;
      break;
    case Frame::Type::Bye:
    case Frame::Type::Ping:
      obj["session_id"] = frame.session_id;
      break;
    case Frame::Type::Assign:
      obj["session_id"] = frame.session_id;
      obj["address"] = frame.address;
      obj["epoch"] = frame.epoch;
      break;
    case Frame::Type::Update:
      obj["session_id"] = frame.session_id;
      obj["address"] = frame.address;
      obj["epoch"] = frame.epoch;
      obj["reason"] = std::string(to_string(frame.reason));
      break;
    case Frame::Type::Error:
      obj["code"] = frame.code;
      obj["detail"] = frame.detail;
      break;
  }
  return obj.dump();
}

Frame decode_frame(const std::string& text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::ParseError, std::string("bad frame: ") + e.what());
  }
  if (!obj.is_object() || !obj.contains("type") || !obj["type"].is_string()) {
    raise(ErrorCode::ParseError, "frame missing type: " + text);
  }
  auto require = [&](const char* field) -> const json& {
    if (!obj.contains(field)) {
      raise(ErrorCode::ParseError,
            "frame missing field '" + std::string(field) + "': " + text);
    }
    return obj[field];
  };

  Frame frame;
  auto type = obj["type"].get<std::string>();
  if (type == "HELLO") {
    frame.type = Frame::Type::Hello;
    frame.model_id = require("model_id").get<std::string>();
  } else if (type == "BYE") {
    frame.type = Frame::Type::Bye;
    frame.session_id = require("session_id").get<std::string>();
  } else if (type == "PING") {
    frame.type = Frame::Type::Ping;
    frame.session_id = require("session_id").get<std::string>();
  } else if (type == "ASSIGN") {
    frame.type = Frame::Type::Assign;
    frame.session_id = require("session_id").get<std::string>();
    frame.address = require("address").get<std::string>();
    frame.epoch = require("epoch").get<std::uint64_t>();
  } else if (type == "UPDATE") {
    frame.type = Frame::Type::Update;
    frame.session_id = require("session_id").get<std::string>();
    frame.address = require("address").get<std::string>();
    frame.epoch = require("epoch").get<std::uint64_t>();
    frame.reason = update_reason_from_string(require("reason").get<std::string>());
  } else if (type == "ERROR") {
    frame.type = Frame::Type::Error;
    frame.code = require("code").get<std::string>();
    frame.detail = require("detail").get<std::string>();
  } else {
    raise(ErrorCode::ParseError, "unknown frame type '" + type + "'");
  }
  return frame;
}

}  // namespace evop
