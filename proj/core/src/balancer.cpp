#include "evop/balancer.hpp"

#include <algorithm>
#include <cmath>

namespace evop {

std::string_view to_string(PlacementPolicy policy) {
  return policy == PlacementPolicy::PrivateFirst ? "private_first"
                                                 : "model_class_routing";
}

PlacementPolicy placement_policy_from_string(std::string_view text) {
  if (text == "private_first" || text == "private-first") {
    return PlacementPolicy::PrivateFirst;
  }
  if (text == "model_class_routing" || text == "model-class-routing") {
    return PlacementPolicy::ModelClassRouting;
  }
  raise(ErrorCode::ParseError,
        "unknown placement policy '" + std::string(text) + "'");
}

std::string_view to_string(DegradationRule rule) {
  switch (rule) {
    case DegradationRule::SustainedCpu: return "sustained_cpu";
    case DegradationRule::Blackhole: return "blackhole";
    case DegradationRule::CrashDetected: return "crash_detected";
  }
  return "unknown";
}

void BalancerConfig::validate() const {
  if (monitor_interval == 0) {
    raise(ErrorCode::ValidationError, "monitor interval must be positive");
  }
  if (cpu_high_threshold <= 0.0 || cpu_high_threshold >= 1.0) {
    raise(ErrorCode::ValidationError, "cpu threshold must be in (0,1)");
  }
  if (underuse_threshold <= 0.0 || underuse_threshold >= 1.0) {
    raise(ErrorCode::ValidationError, "underuse threshold must be in (0,1)");
  }
  if (sustained_window == 0) {
    raise(ErrorCode::ValidationError, "sustained window must be >= 1");
  }
}

LoadBalancer::LoadBalancer(EventLoop& loop, TraceSink* trace,
                           const ModelLibrary& library, CloudFabric& fabric,
                           BalancerConfig config)
    : loop_(loop),
      trace_(trace),
      library_(library),
      fabric_(fabric),
      config_(config) {
  config_.validate();
}

std::vector<ProviderKind> LoadBalancer::tier_order(
    const ImageDescriptor& image) const {
  if (config_.placement_policy == PlacementPolicy::ModelClassRouting &&
      image.model_class == ModelClass::Streamlined) {
    return {ProviderKind::Public, ProviderKind::Private};
  }
  return {ProviderKind::Private, ProviderKind::Public};
}

std::vector<ProviderKind> LoadBalancer::tier_order_from(
    ProviderKind first) const {
  if (first == ProviderKind::Public) {
    return {ProviderKind::Public, ProviderKind::Private};
  }
  return {ProviderKind::Private, ProviderKind::Public};
}

std::uint64_t LoadBalancer::broker_sessions(
    const std::string& instance_id) const {
  return broker_ ? broker_->active_session_count(instance_id) : 0;
}

std::set<std::string> LoadBalancer::unusable_sources() const {
  std::set<std::string> out = degraded_;
  out.insert(crashed_.begin(), crashed_.end());
  return out;
}

std::optional<LoadBalancer::PlacementDecision> LoadBalancer::try_place(
    const ImageDescriptor& image, const std::vector<ProviderKind>& tiers,
    const std::set<std::string>& excluded) {
  auto records = fabric_.list_instances(std::nullopt);
  bool fallback = false;
  for (const auto& tier : tiers) {
    std::vector<ProviderDescriptor> tier_providers;
    for (const auto& prov : fabric_.providers()) {
      if (prov.kind == tier) tier_providers.push_back(prov);
    }

    // Step 1: fill an existing instance of the serving image. Pending
    // instances count — their sessions queue until boot.
    const InstanceRecord* best = nullptr;
    std::uint64_t best_count = 0;
    for (const auto& prov : tier_providers) {
      for (const auto& record : records) {
        if (record.provider_id != prov.provider_id) continue;
        if (record.image_id != image.image_id) continue;
        if (record.state != InstanceState::Pending &&
            record.state != InstanceState::Running) {
          continue;
        }
        if (excluded.count(record.instance_id)) continue;
        auto count = broker_sessions(record.instance_id);
        if (count >= image.max_sessions) continue;
        if (!best || count < best_count ||
            (count == best_count && record.instance_id < best->instance_id)) {
          best = &record;
          best_count = count;
        }
      }
    }
    if (best) {
      return PlacementDecision{best->instance_id, false, fallback, best->state};
    }

    // Step 2: launch on the first provider of the tier with headroom.
    for (const auto& prov : tier_providers) {
      std::uint64_t used = 0;
      for (const auto& record : records) {
        if (record.provider_id == prov.provider_id) ++used;
      }
      if (prov.capacity && used >= *prov.capacity) continue;
      auto record = fabric_.launch(prov.provider_id, image.image_id);
      return PlacementDecision{record.instance_id, true, fallback, record.state};
    }

    fallback = true;  // this tier is saturated
  }
  return std::nullopt;
}

std::string LoadBalancer::place(const std::string& model_id) {
  const auto& image = library_.resolve(model_id);
  auto decision = try_place(image, tier_order(image), unusable_sources());
  if (!decision) {
    if (trace_) {
      trace_->emit(loop_.now(), "place-failed", model_id, "all providers exhausted");
    }
    raise(ErrorCode::PlacementFailed,
          "no provider can host a session for model '" + model_id + "'");
  }
  if (trace_) {
    auto record = fabric_.find_instance(decision->instance_id);
    trace_->emit(loop_.now(), "place", model_id,
                 "instance=" + decision->instance_id + " provider=" +
                     record->provider_id +
                     " launched=" + (decision->launched ? "1" : "0") +
                     " saturated=" + (decision->fallback_tier ? "1" : "0"));
  }
  return decision->instance_id;
}

void LoadBalancer::on_session_end(const std::string& session_id,
                                  const std::string& instance_id) {
  (void)session_id;
  (void)instance_id;
  reverse_migrate(loop_.now());
}

void LoadBalancer::detect_crashes(std::vector<DegradationVerdict>& verdicts) {
  std::set<std::string> live;
  for (const auto& record : fabric_.list_instances(std::nullopt)) {
    live.insert(record.instance_id);
  }
  std::set<std::string> expected = known_live_;
  if (broker_) {
    for (const auto& [id, session] : broker_->sessions()) {
      if (session.state != SessionState::Closed) {
        expected.insert(session.instance_id);
      }
    }
  }
  for (const auto& id : expected) {
    if (live.count(id) || retired_.count(id) || crashed_.count(id)) continue;
    DegradationVerdict verdict;
    verdict.instance_id = id;
    verdict.rule = DegradationRule::CrashDetected;
    verdicts.push_back(std::move(verdict));
  }
  known_live_ = std::move(live);
}

void LoadBalancer::evaluate_windows(std::vector<DegradationVerdict>& verdicts) {
  for (const auto& record : fabric_.list_instances(std::nullopt)) {
    if (record.state != InstanceState::Running &&
        record.state != InstanceState::Degraded &&
        record.state != InstanceState::Draining) {
      continue;
    }
    auto sample = fabric_.poll_metrics(record.instance_id);
    auto& window = windows_[record.instance_id];
    if (window.empty() || window.back().at < sample.at) {
      window.push_back(sample);
      while (window.size() > config_.sustained_window) {
        window.pop_front();
      }
    }
    if (record.state != InstanceState::Running) continue;
    if (window.size() < config_.sustained_window) continue;

    bool all_cpu_high = true;
    bool all_blackhole = true;
    for (const auto& s : window) {
      if (s.cpu < config_.cpu_high_threshold) all_cpu_high = false;
      if (!(s.net_out == 0 && s.net_in > 0)) all_blackhole = false;
    }
    if (all_cpu_high || all_blackhole) {
      DegradationVerdict verdict;
      verdict.instance_id = record.instance_id;
      verdict.rule = all_cpu_high ? DegradationRule::SustainedCpu
                                  : DegradationRule::Blackhole;
      verdict.evidence.assign(window.begin(), window.end());
      verdicts.push_back(std::move(verdict));
    }
  }
}

std::vector<DegradationVerdict> LoadBalancer::monitor_tick(VirtualTime now) {
  std::vector<DegradationVerdict> verdicts;
  detect_crashes(verdicts);
  evaluate_windows(verdicts);

  for (const auto& verdict : verdicts) {
    replace_instance(verdict);
  }

  // Keep half-done replacements moving: targets may have booted since the
  // verdict fired.
  auto in_flight = degraded_;
  in_flight.insert(crashed_.begin(), crashed_.end());
  for (const auto& id : in_flight) {
    migrate_away(id, UpdateReason::DegradationReplacement, nullptr);
  }

  reverse_migrate(now);
  rebalance();
  return verdicts;
}

LoadBalancer::ReplacementOutcome LoadBalancer::replace_instance(
    const DegradationVerdict& verdict) {
  ReplacementOutcome outcome;
  const auto& id = verdict.instance_id;
  auto record = fabric_.find_instance(id);
  if (record && record->state == InstanceState::Draining) {
    return outcome;
  }
  if (trace_) {
    trace_->emit(loop_.now(), "verdict", id,
                 "rule=" + std::string(to_string(verdict.rule)) +
                     " evidence=" + std::to_string(verdict.evidence.size()));
  }
  if (verdict.rule == DegradationRule::CrashDetected) {
    if (broker_sessions(id) == 0) {
      windows_.erase(id);
      return outcome;  // nothing was mapped there; just forget it
    }
    crashed_.insert(id);
  } else {
    if (record && record->state == InstanceState::Running) {
      fabric_.mark(id, InstanceState::Degraded);
    }
    if (broker_sessions(id) == 0) {
      // Nothing to migrate: replace by simple retirement.
      retire_if_empty(id, "degraded-empty");
      return outcome;
    }
    degraded_.insert(id);
  }
  std::string first_target;
  outcome.migrated_now = migrate_away(id, UpdateReason::DegradationReplacement,
                                      &first_target);
  outcome.replacement_id = first_target;
  return outcome;
}

std::size_t LoadBalancer::migrate_away(const std::string& old_id,
                                       UpdateReason reason,
                                       std::string* first_target) {
  if (!broker_) return 0;
  auto sessions = broker_->sessions_on(old_id);
  std::size_t migrated = 0;
  auto excluded = unusable_sources();
  excluded.insert(old_id);

  ProviderKind old_tier = ProviderKind::Private;
  if (auto record = fabric_.find_instance(old_id)) {
    old_tier = fabric_.provider(record->provider_id).kind;
  }

  for (const auto& session_id : sessions) {
    const auto& session = broker_->sessions().at(session_id);
    const auto& image = library_.resolve(session.model_id);
    auto decision = try_place(image, tier_order_from(old_tier), excluded);
    if (!decision) {
      if (trace_) {
        trace_->emit(loop_.now(), "replace-stalled", old_id,
                     "session=" + session_id + " no placement");
      }
      continue;  // re-tried next tick
    }
    if (first_target && first_target->empty()) {
      *first_target = decision->instance_id;
    }
    if (decision->state != InstanceState::Running) {
      continue;  // target still booting; session follows once it runs
    }
    broker_->push_update(session_id, decision->instance_id, reason);
    ++migrated;
  }

  if (broker_->sessions_on(old_id).empty()) {
    degraded_.erase(old_id);
    if (crashed_.erase(old_id) > 0) {
      windows_.erase(old_id);
      return migrated;  // already terminated by the crash itself
    }
    retire_if_empty(old_id, "replaced");
  }
  return migrated;
}

void LoadBalancer::retire_if_empty(const std::string& instance_id,
                                   std::string_view why) {
  auto record = fabric_.find_instance(instance_id);
  if (!record || record->state == InstanceState::Terminated) return;
  if (broker_sessions(instance_id) > 0) return;
  if (record->state == InstanceState::Running ||
      record->state == InstanceState::Degraded) {
    fabric_.mark(instance_id, InstanceState::Draining);
  }
  if (trace_) {
    trace_->emit(loop_.now(), "retire", instance_id, std::string(why));
  }
  fabric_.terminate(instance_id);
  retired_.insert(instance_id);
  degraded_.erase(instance_id);
  windows_.erase(instance_id);
}

std::size_t LoadBalancer::reverse_migrate(VirtualTime now) {
  if (last_reverse_migration_ &&
      now - *last_reverse_migration_ < config_.migration_cooldown) {
    return 0;
  }

  auto records = fabric_.list_instances(std::nullopt);
  auto excluded = unusable_sources();

  // Occupancy over usable private instances only; instances on their way
  // out carry no future capacity.
  std::uint64_t private_slots = 0;
  std::uint64_t private_occupied = 0;
  std::uint64_t running_free = 0;
  std::uint64_t pending_free = 0;
  bool private_headroom = false;
  for (const auto& prov : fabric_.providers()) {
    if (prov.kind != ProviderKind::Private) continue;
    std::uint64_t used_capacity = 0;
    for (const auto& record : records) {
      if (record.provider_id != prov.provider_id) continue;
      ++used_capacity;
      if (record.state != InstanceState::Pending &&
          record.state != InstanceState::Running) {
        continue;
      }
      if (excluded.count(record.instance_id)) continue;
      auto max_sessions = library_.image(record.image_id).max_sessions;
      auto count = broker_sessions(record.instance_id);
      private_slots += max_sessions;
      private_occupied += std::min(count, max_sessions);
      auto free = max_sessions > count ? max_sessions - count : 0;
      if (record.state == InstanceState::Running) {
        running_free += free;
      } else {
        pending_free += free;
      }
    }
    if (!prov.capacity || used_capacity < *prov.capacity) {
      private_headroom = true;
    }
  }

  if (private_slots > 0) {
    double fraction = static_cast<double>(private_occupied) /
                      static_cast<double>(private_slots);
    if (fraction >= config_.underuse_threshold) return 0;
  } else if (!private_headroom) {
    return 0;
  }

  // Pick the least-loaded public instance whose image may live privately.
  const InstanceRecord* candidate = nullptr;
  std::uint64_t candidate_count = 0;
  for (const auto& record : records) {
    if (fabric_.provider(record.provider_id).kind != ProviderKind::Public) {
      continue;
    }
    if (record.state != InstanceState::Pending &&
        record.state != InstanceState::Running) {
      continue;
    }
    if (excluded.count(record.instance_id)) continue;
    if (config_.placement_policy == PlacementPolicy::ModelClassRouting &&
        library_.image(record.image_id).model_class == ModelClass::Streamlined) {
      continue;  // public is home for streamlined images
    }
    auto count = broker_sessions(record.instance_id);
    if (!candidate || count < candidate_count ||
        (count == candidate_count &&
         record.instance_id < candidate->instance_id)) {
      candidate = &record;
      candidate_count = count;
    }
  }
  if (!candidate) return 0;

  if (candidate_count == 0) {
    // An idle public instance is pure cost; retire it outright. This does
    // not stamp the cooldown — nothing moved.
    retire_if_empty(candidate->instance_id, "idle-public");
    if (trace_) {
      trace_->emit(loop_.now(), "reverse", candidate->instance_id, "moved=0");
    }
    return 0;
  }

  if (running_free < candidate_count) {
    if (running_free + pending_free >= candidate_count) {
      return 0;  // hosts are booting; migrate on a later pass
    }
    if (!private_headroom) return 0;
    // Stage capacity: launch one private host; the next pass re-evaluates.
    const auto& image = library_.image(candidate->image_id);
    for (const auto& prov : fabric_.providers()) {
      if (prov.kind != ProviderKind::Private) continue;
      std::uint64_t used = 0;
      for (const auto& record : records) {
        if (record.provider_id == prov.provider_id) ++used;
      }
      if (prov.capacity && used >= *prov.capacity) continue;
      auto launched = fabric_.launch(prov.provider_id, image.image_id);
      if (trace_) {
        trace_->emit(loop_.now(), "reverse-stage", launched.instance_id,
                     "for=" + candidate->instance_id);
      }
      break;
    }
    return 0;
  }

  // Enough running private slots: move every session, then retire the host.
  const std::string source_id = candidate->instance_id;
  auto sessions = broker_ ? broker_->sessions_on(source_id)
                          : std::vector<std::string>{};
  std::size_t migrated = 0;
  for (const auto& session_id : sessions) {
    const auto& session = broker_->sessions().at(session_id);
    const auto& image = library_.resolve(session.model_id);
    auto decision =
        try_place(image, {ProviderKind::Private}, excluded);
    if (!decision || decision->state != InstanceState::Running) {
      continue;
    }
    broker_->push_update(session_id, decision->instance_id,
                         UpdateReason::ReverseMigration);
    ++migrated;
  }
  if (trace_) {
    trace_->emit(loop_.now(), "reverse", source_id,
                 "moved=" + std::to_string(migrated));
  }
  if (migrated > 0) {
    last_reverse_migration_ = now;
  }
  retire_if_empty(source_id, "reverse-migrated");
  return migrated;
}

std::size_t LoadBalancer::rebalance() {
  if (!broker_) return 0;
  auto records = fabric_.list_instances(std::nullopt);

  // (image, provider) -> running instances
  std::map<std::pair<std::string, std::string>, std::vector<const InstanceRecord*>>
      groups;
  for (const auto& record : records) {
    if (record.state != InstanceState::Running) continue;
    groups[{record.image_id, record.provider_id}].push_back(&record);
  }

  std::size_t moved = 0;
  std::set<std::string> images_moved;
  for (const auto& [key, members] : groups) {
    const auto& image_id = key.first;
    if (members.size() < 2 || images_moved.count(image_id)) continue;

    const InstanceRecord* fullest = nullptr;
    const InstanceRecord* emptiest = nullptr;
    std::uint64_t max_count = 0;
    std::uint64_t min_count = 0;
    for (const auto* record : members) {
      auto count = broker_sessions(record->instance_id);
      if (!fullest || count > max_count ||
          (count == max_count && record->instance_id < fullest->instance_id)) {
        fullest = record;
        max_count = count;
      }
      if (!emptiest || count < min_count ||
          (count == min_count && record->instance_id < emptiest->instance_id)) {
        emptiest = record;
        min_count = count;
      }
    }
    if (!fullest || !emptiest || fullest == emptiest) continue;
    if (max_count - min_count < 2) continue;

    auto sessions = broker_->sessions_on(fullest->instance_id);
    if (sessions.empty()) continue;
    broker_->push_update(sessions.front(), emptiest->instance_id,
                         UpdateReason::Rebalance);
    if (trace_) {
      trace_->emit(loop_.now(), "rebalance", image_id,
                   "session=" + sessions.front() + " from=" +
                       fullest->instance_id + " to=" + emptiest->instance_id);
    }
    images_moved.insert(image_id);
    ++moved;
  }
  return moved;
}

void LoadBalancer::rebuild() {
  windows_.clear();
  degraded_.clear();
  crashed_.clear();
  known_live_.clear();
  last_reverse_migration_.reset();

  for (const auto& record : fabric_.list_instances(std::nullopt)) {
    known_live_.insert(record.instance_id);
    if (record.state == InstanceState::Degraded &&
        broker_sessions(record.instance_id) > 0) {
      degraded_.insert(record.instance_id);
    }
  }
  if (trace_) {
    trace_->emit(loop_.now(), "balancer-rebuild", "balancer",
                 "live=" + std::to_string(known_live_.size()) +
                     " degraded=" + std::to_string(degraded_.size()));
  }
}

}  // namespace evop
