#pragma once

#include <cstdint>
#include <string>

#include "evop/common.hpp"
#include "evop/messages.hpp"

namespace evop {

enum class SessionState { Active, Migrating, Closed };

std::string_view to_string(SessionState state);
SessionState session_state_from_string(std::string_view text);

/// One end-user session, bound to exactly one serving instance. The epoch
/// increases on every reassignment and orders pushed updates.
struct Session {
  std::string session_id;
  std::string model_id;
  std::string instance_id;
  std::uint64_t epoch = 1;
  SessionState state = SessionState::Active;
  VirtualTime created_at = 0;
  VirtualTime last_activity = 0;
};

struct SessionUpdate {
  std::string session_id;
  std::string new_address;
  std::string new_instance_id;
  std::uint64_t epoch = 1;
  UpdateReason reason = UpdateReason::Initial;
};

}  // namespace evop
