#include "evop/provider.hpp"

namespace evop {

std::string_view to_string(ProviderKind kind) {
  return kind == ProviderKind::Private ? "private" : "public";
}

ProviderKind provider_kind_from_string(std::string_view text) {
  if (text == "private") return ProviderKind::Private;
  if (text == "public") return ProviderKind::Public;
  raise(ErrorCode::ParseError,
        "provider kind must be private or public, got '" + std::string(text) +
            "'");
}

void ProviderDescriptor::validate() const {
  if (provider_id.empty()) {
    raise(ErrorCode::ValidationError, "provider id must not be empty");
  }
  if (kind == ProviderKind::Private && !capacity.has_value()) {
    raise(ErrorCode::ValidationError,
          "private provider '" + provider_id + "' requires a capacity");
  }
  if (kind == ProviderKind::Public && capacity.has_value()) {
    raise(ErrorCode::ValidationError,
          "public provider '" + provider_id + "' must be elastic (no capacity)");
  }
  if (capacity.has_value() && *capacity == 0) {
    raise(ErrorCode::ValidationError,
          "provider '" + provider_id + "' capacity must be positive");
  }
  if (cost_rate < 0) {
    raise(ErrorCode::ValidationError,
          "provider '" + provider_id + "' cost rate must be non-negative");
  }
  if (billing_granularity == 0) {
    raise(ErrorCode::ValidationError,
          "provider '" + provider_id + "' billing granularity must be positive");
  }
}

std::string_view to_string(InstanceState state) {
  switch (state) {
    case InstanceState::Pending: return "pending";
    case InstanceState::Running: return "running";
    case InstanceState::Degraded: return "degraded";
    case InstanceState::Draining: return "draining";
    case InstanceState::Terminated: return "terminated";
  }
  return "unknown";
}

bool instance_transition_allowed(InstanceState from, InstanceState to) {
  switch (from) {
    case InstanceState::Pending:
      return to == InstanceState::Running || to == InstanceState::Terminated;
    case InstanceState::Running:
      return to == InstanceState::Degraded || to == InstanceState::Draining ||
             to == InstanceState::Terminated;
    case InstanceState::Degraded:
      return to == InstanceState::Draining || to == InstanceState::Terminated;
    case InstanceState::Draining:
      return to == InstanceState::Terminated;
    case InstanceState::Terminated:
      return false;
  }
  return false;
}

}  // namespace evop
