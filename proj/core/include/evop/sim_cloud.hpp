#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evop/common.hpp"
#include "evop/event_loop.hpp"
#include "evop/gateway.hpp"
#include "evop/model_library.hpp"
#include "evop/provider.hpp"
#include "evop/trace.hpp"

namespace evop {

enum class FaultKind { CpuSaturation, NetworkBlackhole, Crash };

std::string_view to_string(FaultKind kind);
FaultKind fault_kind_from_string(std::string_view text);

struct FaultInjection {
  std::string instance_id;
  FaultKind kind = FaultKind::CpuSaturation;
  VirtualTime start = 0;
  std::optional<Duration> duration;  // absent = permanent
};

/// Synthetic per-instance load: grounds the health metrics in reproducible
/// numbers. CPU scales with concurrent sessions and clamps at 1.0; traffic
/// and disk scale with requests.
struct LoadModel {
  double per_session_cpu = 0.20;
  std::uint64_t per_request_bytes_in = 1024;
  std::uint64_t per_request_bytes_out = 4096;
  std::uint64_t disk_bytes_per_request = 8192;
};

/// Deterministic in-process cloud: implements the provider abstraction under
/// the virtual clock, with boot delays, rounded-up billing, a synthetic load
/// model and fault injection. Owns one model gateway per instance.
class SimCloud : public CloudFabric {
 public:
  SimCloud(EventLoop& loop, TraceSink* trace, const ModelLibrary& library,
           LoadModel load_model = {}, Duration monitor_interval = 10);

  void add_provider(ProviderDescriptor descriptor);

  // CloudFabric
  InstanceRecord launch(const std::string& provider_id,
                        const std::string& image_id) override;
  void terminate(const std::string& instance_id) override;
  HealthSample poll_metrics(const std::string& instance_id) override;
  std::vector<InstanceRecord> list_instances(
      const std::optional<std::string>& provider_id) override;
  std::optional<InstanceRecord> find_instance(
      const std::string& instance_id) const override;
  const ProviderDescriptor& provider(
      const std::string& provider_id) const override;
  std::vector<ProviderDescriptor> providers() const override;
  void mark(const std::string& instance_id, InstanceState state) override;
  double accrued_cost() const override;

  void inject_fault(const FaultInjection& fault);

  /// Session bookkeeping mirrors the client<->instance reality, so it
  /// survives broker restarts.
  void assign_session(const std::string& instance_id);
  void release_session(const std::string& instance_id);
  std::uint64_t session_count(const std::string& instance_id) const;

  /// Delivers `count` model requests to an instance. Requests reaching a
  /// pending instance wait for boot; requests to a dead instance are lost.
  void deliver_requests(const std::string& instance_id,
                        const std::string& model_id, std::uint64_t count);

  const ModelGateway& gateway(const std::string& instance_id) const;
  const InstanceRecord& record(const std::string& instance_id) const;

  /// All records ever created, terminated included; ordered by instance id.
  std::vector<InstanceRecord> all_records() const;

  /// Every state the instance has been in, in order, with timestamps.
  const std::vector<std::pair<VirtualTime, InstanceState>>& state_history(
      const std::string& instance_id) const;

  Duration monitor_interval() const noexcept { return monitor_interval_; }
  const LoadModel& load_model() const noexcept { return load_model_; }

  struct UsageCounters {
    std::map<std::string, std::uint64_t> launched_by_provider;
    std::map<std::string, std::uint64_t> terminated_by_provider;
    std::uint64_t max_concurrent_public = 0;
  };
  const UsageCounters& usage() const noexcept { return usage_; }

 private:
  struct Instance {
    InstanceRecord record;
    std::unique_ptr<ModelGateway> gateway;
    std::uint64_t session_count = 0;
    std::map<std::uint64_t, std::uint64_t> requests_by_interval;
    std::uint64_t queued_requests = 0;  // delivered while pending
    std::optional<double> billed;       // final cost, set at termination
    std::vector<std::pair<VirtualTime, InstanceState>> history;
  };

  Instance& instance_or_throw(const std::string& instance_id);
  const Instance& instance_or_throw(const std::string& instance_id) const;
  std::uint64_t non_terminated_count(const std::string& provider_id) const;
  double accrual_for(const Instance& inst, VirtualTime at) const;
  void finish_termination(Instance& inst, std::string_view reason);
  bool fault_covers_interval(const Instance& inst, FaultKind kind,
                             VirtualTime begin, VirtualTime end) const;
  HealthSample compute_sample(const Instance& inst, VirtualTime boundary) const;
  void update_public_concurrency();

  EventLoop& loop_;
  TraceSink* trace_;
  const ModelLibrary& library_;
  LoadModel load_model_;
  Duration monitor_interval_;

  std::map<std::string, ProviderDescriptor> providers_;
  std::map<std::string, Instance> instances_;
  std::map<std::string, std::uint64_t> per_provider_seq_;
  std::vector<FaultInjection> faults_;
  std::uint64_t next_instance_seq_ = 1;
  UsageCounters usage_;
};

}  // namespace evop
