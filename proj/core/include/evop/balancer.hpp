#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evop/broker.hpp"
#include "evop/common.hpp"
#include "evop/event_loop.hpp"
#include "evop/model_library.hpp"
#include "evop/provider.hpp"
#include "evop/trace.hpp"

namespace evop {

enum class PlacementPolicy { PrivateFirst, ModelClassRouting };

std::string_view to_string(PlacementPolicy policy);
PlacementPolicy placement_policy_from_string(std::string_view text);

struct BalancerConfig {
  Duration monitor_interval = 10;
  double cpu_high_threshold = 0.90;
  std::size_t sustained_window = 5;
  double underuse_threshold = 0.50;
  Duration migration_cooldown = 120;
  PlacementPolicy placement_policy = PlacementPolicy::PrivateFirst;

  void validate() const;
};

enum class DegradationRule { SustainedCpu, Blackhole, CrashDetected };

std::string_view to_string(DegradationRule rule);

struct DegradationVerdict {
  std::string instance_id;
  DegradationRule rule = DegradationRule::SustainedCpu;
  std::vector<HealthSample> evidence;  // the sustained window; empty for crash
};

/// The Load Balancer: places sessions cheaply (private first, or routed by
/// model class), watches instance health, replaces degraded or crashed
/// instances, migrates sessions back to an underused private cloud, and
/// evens out session counts across same-image instances.
class LoadBalancer : public PlacementService {
 public:
  LoadBalancer(EventLoop& loop, TraceSink* trace, const ModelLibrary& library,
               CloudFabric& fabric, BalancerConfig config);

  void set_broker(ResourceBroker* broker) { broker_ = broker; }
  const BalancerConfig& config() const noexcept { return config_; }

  // PlacementService
  std::string place(const std::string& model_id) override;
  void on_session_end(const std::string& session_id,
                      const std::string& instance_id) override;

  /// One monitoring pass: polls health, emits degradation verdicts, drives
  /// replacements forward, then reverse migration and rebalancing.
  std::vector<DegradationVerdict> monitor_tick(VirtualTime now);

  struct ReplacementOutcome {
    std::string replacement_id;  // empty when nothing was needed/possible
    std::size_t migrated_now = 0;
  };

  /// Starts replacing the verdict's subject. Sessions move as soon as a
  /// running target exists; the subject drains and terminates once empty.
  ReplacementOutcome replace_instance(const DegradationVerdict& verdict);

  /// Moves sessions off the least-loaded public instance when the private
  /// cloud is underused and can host them. No-op within the cooldown of the
  /// previous reverse migration.
  std::size_t reverse_migrate(VirtualTime now);

  /// At most one move per image per call: fullest -> emptiest among running
  /// same-image same-provider instances when the gap is >= 2.
  std::size_t rebalance();

  /// Reconstructs volatile state after a manager restart: re-learns live
  /// instances and resumes replacements for degraded or vanished instances.
  void rebuild();

 private:
  struct PlacementDecision {
    std::string instance_id;
    bool launched = false;
    bool fallback_tier = false;
    InstanceState state = InstanceState::Pending;
  };

  std::vector<ProviderKind> tier_order(const ImageDescriptor& image) const;
  std::vector<ProviderKind> tier_order_from(ProviderKind first) const;

  /// Fill-before-launch over the given tier order. Pending instances are
  /// valid targets: their sessions queue until boot.
  std::optional<PlacementDecision> try_place(
      const ImageDescriptor& image, const std::vector<ProviderKind>& tiers,
      const std::set<std::string>& excluded);

  std::uint64_t broker_sessions(const std::string& instance_id) const;
  std::set<std::string> unusable_sources() const;
  std::size_t migrate_away(const std::string& old_id, UpdateReason reason,
                           std::string* first_target);
  void retire_if_empty(const std::string& instance_id, std::string_view why);
  void detect_crashes(std::vector<DegradationVerdict>& verdicts);
  void evaluate_windows(std::vector<DegradationVerdict>& verdicts);

  EventLoop& loop_;
  TraceSink* trace_;
  const ModelLibrary& library_;
  CloudFabric& fabric_;
  BalancerConfig config_;
  ResourceBroker* broker_ = nullptr;

  std::map<std::string, std::deque<HealthSample>> windows_;
  std::set<std::string> degraded_;   // awaiting replacement, still serving
  std::set<std::string> crashed_;    // vanished with sessions still mapped
  std::set<std::string> retired_;    // terminated deliberately by us
  std::set<std::string> known_live_;
  std::optional<VirtualTime> last_reverse_migration_;
};

}  // namespace evop
