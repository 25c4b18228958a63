#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evop/common.hpp"
#include "evop/scenario.hpp"

namespace evop {

/// Aggregated outcome of one scenario run. Counts reconcile with the trace:
/// they are derived from it, and the cost line equals the provider layer's
/// accrued total.
struct MetricsReport {
  std::string scenario;
  std::uint64_t seed = 0;
  Duration duration = 0;
  std::uint64_t sessions_total = 0;
  std::map<std::string, std::uint64_t> sessions_first_placement;  // provider
  std::map<std::string, std::uint64_t> migrations_by_reason;
  std::map<std::string, std::uint64_t> launched_by_provider;
  std::map<std::string, std::uint64_t> terminated_by_provider;
  double total_cost = 0.0;
  std::uint64_t saturation_events = 0;
  std::map<std::string, std::uint64_t> verdicts_by_rule;
  std::uint64_t max_concurrent_public = 0;
  std::uint64_t placement_failures = 0;
  std::string trace_hash;

  /// Stable key order, so reports diff cleanly.
  std::string to_text() const;
};

struct CrashInjection {
  VirtualTime at = 0;
  Duration restart_delay = 15;
};

struct RunOptions {
  std::optional<std::uint64_t> seed_override;
  /// Broker crashes injected on top of the scenario's own events.
  std::vector<CrashInjection> extra_crashes;
};

struct RunResult {
  MetricsReport report;
  /// session_id -> instance_id for sessions still active at end of scenario,
  /// captured before teardown.
  std::map<std::string, std::string> final_assignment;
  std::map<std::string, std::uint64_t> final_epochs;
  std::vector<std::string> trace_lines;
  std::string trace_text;
  /// Contents of the Active Sessions journal at end of run.
  std::string journal_bytes;
  /// Client-observed protocol breaches (e.g. epochs out of order); empty on
  /// a healthy run.
  std::vector<std::string> protocol_violations;
};

RunResult run_scenario(const ScenarioSpec& spec, const RunOptions& options = {});

}  // namespace evop
