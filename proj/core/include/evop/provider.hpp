#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evop/common.hpp"

namespace evop {

enum class ProviderKind { Private, Public };

std::string_view to_string(ProviderKind kind);
ProviderKind provider_kind_from_string(std::string_view text);

/// One cloud in the federation. Private clouds are capacity-bounded and
/// usually free to run; public clouds are elastic and billed per instance.
struct ProviderDescriptor {
  std::string provider_id;
  ProviderKind kind = ProviderKind::Private;
  std::optional<std::uint64_t> capacity;  // max concurrent non-terminated
  double cost_rate = 0.0;                 // currency units per granularity
  Duration billing_granularity = 3600;    // charge rounds up to multiples
  Duration boot_time = 30;                // pending -> running delay

  void validate() const;
};

enum class InstanceState { Pending, Running, Degraded, Draining, Terminated };

std::string_view to_string(InstanceState state);

/// True when the state machine permits `from` -> `to`. Terminated is final;
/// degraded may still drain before termination.
bool instance_transition_allowed(InstanceState from, InstanceState to);

struct HealthSample {
  VirtualTime at = 0;
  double cpu = 0.0;  // fraction of one instance, clamped to [0,1]
  std::uint64_t disk_read = 0;
  std::uint64_t disk_write = 0;
  std::uint64_t net_in = 0;
  std::uint64_t net_out = 0;
};

struct InstanceRecord {
  std::string instance_id;
  std::string provider_id;
  std::string image_id;
  std::uint64_t image_version = 1;
  std::string address;  // opaque "host:port" endpoint
  InstanceState state = InstanceState::Pending;
  VirtualTime launch_time = 0;
  std::optional<VirtualTime> terminate_time;
  std::optional<HealthSample> last_sample;
};

/// Cross-cloud control surface. The broker and balancer launch, terminate,
/// enumerate and observe instances through this interface without knowing
/// which backend serves a provider id.
class CloudFabric {
 public:
  virtual ~CloudFabric() = default;

  virtual InstanceRecord launch(const std::string& provider_id,
                                const std::string& image_id) = 0;
  virtual void terminate(const std::string& instance_id) = 0;
  virtual HealthSample poll_metrics(const std::string& instance_id) = 0;

  /// Non-terminated records, ordered by (launch_time, instance_id).
  virtual std::vector<InstanceRecord> list_instances(
      const std::optional<std::string>& provider_id = std::nullopt) = 0;

  /// Record lookup regardless of state; nullopt when the id was never seen.
  virtual std::optional<InstanceRecord> find_instance(
      const std::string& instance_id) const = 0;

  virtual const ProviderDescriptor& provider(
      const std::string& provider_id) const = 0;
  virtual std::vector<ProviderDescriptor> providers() const = 0;

  /// Control-plane state changes driven by the balancer (degraded, draining).
  virtual void mark(const std::string& instance_id, InstanceState state) = 0;

  /// Cost accrued so far across all providers, at the current virtual time.
  virtual double accrued_cost() const = 0;
};

}  // namespace evop
