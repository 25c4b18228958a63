#pragma once

// Shared fixtures and trace-replay checkers. The checkers reconstruct
// system state from the trace alone, independently of the balancer's own
// bookkeeping, so they can catch the balancer lying to itself.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evop/model_library.hpp"
#include "evop/provider.hpp"
#include "evop/runner.hpp"
#include "evop/scenario.hpp"
#include "evop/trace_query.hpp"

#ifndef EVOP_SCENARIO_DIR
#define EVOP_SCENARIO_DIR "scenarios"
#endif

namespace evop::testing {

inline std::string scenario_path(const std::string& name) {
  return std::string(EVOP_SCENARIO_DIR) + "/" + name + ".evop";
}

inline ScenarioSpec load_scenario(const std::string& name) {
  return parse_scenario(scenario_path(name));
}

inline const std::vector<std::string>& bundled_scenarios() {
  static const std::vector<std::string> names = {
      "fill",
      "overflow",
      "drain-and-reverse-migrate",
      "cpu-fault",
      "blackhole-fault",
      "crash-recovery",
      "model-class-routing",
      "rebalance-convergence",
      "jitter-overflow",
  };
  return names;
}

/// Replayed view of the infrastructure at one point in the trace.
struct ReplayState {
  struct Inst {
    std::string provider_id;
    std::string image_id;
    InstanceState state = InstanceState::Pending;
    std::set<std::string> sessions;
  };
  std::map<std::string, Inst> instances;
  std::map<std::string, std::string> session_instance;
};

struct ReplayCheck {
  bool ok = true;
  std::string failure;
};

/// Steps the trace and calls `visit(state, event)` after applying each
/// event. Stops early when the visitor reports a failure.
template <typename Visitor>
ReplayCheck replay_trace(const ScenarioSpec& spec,
                         const std::vector<std::string>& lines,
                         Visitor&& visit) {
  (void)spec;
  ReplayState state;
  ReplayCheck check;
  for (const auto& event : parse_trace(lines)) {
    if (event.kind == "launch") {
      ReplayState::Inst inst;
      inst.provider_id = event.fields.at("provider");
      auto image = event.fields.at("image");
      inst.image_id = image.substr(0, image.find('@'));
      state.instances[event.subject] = inst;
    } else if (event.kind == "boot") {
      auto it = state.instances.find(event.subject);
      if (it != state.instances.end() &&
          it->second.state == InstanceState::Pending) {
        it->second.state = InstanceState::Running;
      }
    } else if (event.kind == "verdict") {
      auto rule = event.fields.at("rule");
      auto it = state.instances.find(event.subject);
      if (it != state.instances.end() && rule != "crash_detected") {
        it->second.state = InstanceState::Degraded;
      }
    } else if (event.kind == "retire") {
      auto it = state.instances.find(event.subject);
      if (it != state.instances.end()) {
        it->second.state = InstanceState::Draining;
      }
    } else if (event.kind == "terminate" || event.kind == "crash") {
      auto it = state.instances.find(event.subject);
      if (it != state.instances.end()) {
        it->second.state = InstanceState::Terminated;
      }
    } else if (event.kind == "assign" || event.kind == "update") {
      const auto& session = event.subject;
      auto instance = event.fields.at("instance");
      auto old = state.session_instance.find(session);
      if (old != state.session_instance.end()) {
        state.instances[old->second].sessions.erase(session);
      }
      state.session_instance[session] = instance;
      state.instances[instance].sessions.insert(session);
    } else if (event.kind == "closed") {
      const auto& session = event.subject;
      auto old = state.session_instance.find(session);
      if (old != state.session_instance.end()) {
        state.instances[old->second].sessions.erase(session);
        state.session_instance.erase(old);
      }
    }
    visit(state, event, check);
    if (!check.ok) return check;
  }
  return check;
}

inline std::map<std::string, ProviderKind> provider_kinds(
    const ScenarioSpec& spec) {
  std::map<std::string, ProviderKind> kinds;
  for (const auto& provider : spec.providers) {
    kinds[provider.provider_id] = provider.kind;
  }
  return kinds;
}

inline std::map<std::string, std::uint64_t> image_slots(const ScenarioSpec& spec) {
  std::map<std::string, std::uint64_t> slots;
  for (const auto& image : spec.images) {
    slots[image.image_id] = image.max_sessions;
  }
  return slots;
}

/// Private-first invariant: no session lands on a public instance while a
/// private instance of the serving image had a free slot, or the private
/// provider had free launch capacity.
inline ReplayCheck check_private_first(const ScenarioSpec& spec,
                                       const std::vector<std::string>& lines) {
  if (spec.balancer.placement_policy != PlacementPolicy::PrivateFirst) {
    return {};
  }
  auto kinds = provider_kinds(spec);
  auto slots = image_slots(spec);
  std::map<std::string, std::uint64_t> capacity;
  for (const auto& provider : spec.providers) {
    if (provider.capacity) capacity[provider.provider_id] = *provider.capacity;
  }

  return replay_trace(
      spec, lines,
      [&](const ReplayState& state, const TraceEvent& event, ReplayCheck& check) {
        if (event.kind != "assign" && event.kind != "update") return;
        auto instance = event.fields.at("instance");
        auto inst_it = state.instances.find(instance);
        if (inst_it == state.instances.end()) return;
        if (kinds.at(inst_it->second.provider_id) != ProviderKind::Public) {
          return;
        }
        const auto& image_id = inst_it->second.image_id;
        // A free private slot on a live same-image instance?
        for (const auto& [id, inst] : state.instances) {
          if (id == instance) continue;
          if (kinds.at(inst.provider_id) != ProviderKind::Private) continue;
          if (inst.state != InstanceState::Pending &&
              inst.state != InstanceState::Running) {
            continue;
          }
          if (inst.image_id != image_id) continue;
          if (inst.sessions.size() < slots.at(image_id)) {
            check.ok = false;
            check.failure = "t=" + std::to_string(event.at) + ": " +
                            event.subject + " placed on public " + instance +
                            " while private " + id + " had a free slot";
            return;
          }
        }
        // Free private launch capacity?
        for (const auto& [provider_id, cap] : capacity) {
          std::uint64_t used = 0;
          for (const auto& [id, inst] : state.instances) {
            if (inst.provider_id == provider_id &&
                inst.state != InstanceState::Terminated) {
              ++used;
            }
          }
          if (used < cap) {
            check.ok = false;
            check.failure = "t=" + std::to_string(event.at) + ": " +
                            event.subject + " placed on public " + instance +
                            " while " + provider_id + " had free capacity";
            return;
          }
        }
      });
}

/// Capacity invariant: bounded providers never exceed their instance cap.
inline ReplayCheck check_capacity(const ScenarioSpec& spec,
                                  const std::vector<std::string>& lines) {
  std::map<std::string, std::uint64_t> capacity;
  for (const auto& provider : spec.providers) {
    if (provider.capacity) capacity[provider.provider_id] = *provider.capacity;
  }
  return replay_trace(
      spec, lines,
      [&](const ReplayState& state, const TraceEvent& event, ReplayCheck& check) {
        (void)event;
        for (const auto& [provider_id, cap] : capacity) {
          std::uint64_t used = 0;
          for (const auto& [id, inst] : state.instances) {
            if (inst.provider_id == provider_id &&
                inst.state != InstanceState::Terminated) {
              ++used;
            }
          }
          if (used > cap) {
            check.ok = false;
            check.failure = "t=" + std::to_string(event.at) + ": provider " +
                            provider_id + " at " + std::to_string(used) + "/" +
                            std::to_string(cap);
            return;
          }
        }
      });
}

/// Report/trace reconciliation: migration counts equal UPDATE lines by
/// reason, session totals equal ASSIGN lines, verdict counts match.
inline ReplayCheck check_report_reconciles(const MetricsReport& report,
                                           const std::vector<std::string>& lines) {
  std::map<std::string, std::uint64_t> updates;
  std::uint64_t assigns = 0;
  std::map<std::string, std::uint64_t> verdicts;
  for (const auto& event : parse_trace(lines)) {
    if (event.kind == "update") updates[event.fields.at("reason")] += 1;
    if (event.kind == "assign") assigns += 1;
    if (event.kind == "verdict") verdicts[event.fields.at("rule")] += 1;
  }
  ReplayCheck check;
  std::uint64_t total_updates = 0;
  for (const auto& [reason, n] : report.migrations_by_reason) {
    auto seen = updates.count(reason) ? updates.at(reason) : 0;
    if (seen != n) {
      check.ok = false;
      check.failure = "migrations[" + reason + "]=" + std::to_string(n) +
                      " but trace has " + std::to_string(seen);
      return check;
    }
    total_updates += n;
  }
  std::uint64_t trace_updates = 0;
  for (const auto& [reason, n] : updates) trace_updates += n;
  if (trace_updates != total_updates) {
    check.ok = false;
    check.failure = "update lines " + std::to_string(trace_updates) +
                    " != migration total " + std::to_string(total_updates);
    return check;
  }
  if (assigns != report.sessions_total) {
    check.ok = false;
    check.failure = "sessions_total " + std::to_string(report.sessions_total) +
                    " != assign lines " + std::to_string(assigns);
    return check;
  }
  for (const auto& [rule, n] : report.verdicts_by_rule) {
    auto seen = verdicts.count(rule) ? verdicts.at(rule) : 0;
    if (seen != n) {
      check.ok = false;
      check.failure = "verdicts[" + rule + "]=" + std::to_string(n) +
                      " but trace has " + std::to_string(seen);
      return check;
    }
  }
  return check;
}

/// Billing recomputed from the trace alone: launch/terminate pairs rounded
/// up to each provider's granularity, one unit minimum.
inline double recompute_cost(const ScenarioSpec& spec,
                             const std::vector<std::string>& lines) {
  std::map<std::string, const ProviderDescriptor*> providers;
  for (const auto& provider : spec.providers) {
    providers[provider.provider_id] = &provider;
  }
  std::map<std::string, std::pair<std::string, VirtualTime>> launches;
  double total = 0.0;
  for (const auto& event : parse_trace(lines)) {
    if (event.kind == "launch") {
      launches[event.subject] = {event.fields.at("provider"), event.at};
    } else if (event.kind == "terminate" || event.kind == "crash") {
      auto it = launches.find(event.subject);
      if (it == launches.end()) continue;
      const auto* provider = providers.at(it->second.first);
      if (provider->cost_rate > 0.0) {
        Duration elapsed = event.at - it->second.second;
        std::uint64_t units =
            (elapsed + provider->billing_granularity - 1) /
            provider->billing_granularity;
        if (units == 0) units = 1;
        total += static_cast<double>(units) * provider->cost_rate;
      }
      launches.erase(it);
    }
  }
  return total;
}

}  // namespace evop::testing
