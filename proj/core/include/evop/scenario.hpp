#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evop/balancer.hpp"
#include "evop/common.hpp"
#include "evop/model_library.hpp"
#include "evop/provider.hpp"
#include "evop/sim_cloud.hpp"

namespace evop {

struct ScenarioEvent {
  enum class Kind { Arrival, Departure, Burst, Fault, BrokerCrash };

  VirtualTime at = 0;
  Kind kind = Kind::Arrival;
  std::string ref;       // arrival handle; departures and bursts point at it
  std::string model_id;  // arrivals
  std::uint64_t count = 0;  // bursts
  FaultInjection fault;     // faults
  Duration restart_delay = 0;  // broker crashes
};

std::string_view to_string(ScenarioEvent::Kind kind);

/// A declarative, replayable experiment: infrastructure, balancer settings,
/// and a timestamped script of arrivals, departures, workload bursts,
/// faults and broker crashes.
struct ScenarioSpec {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  Duration duration = 600;
  Duration arrival_jitter = 0;  // max seconds added to each arrival
  Duration retry_jitter = 0;    // max seconds added to each client retry
  std::vector<ProviderDescriptor> providers;
  std::vector<ImageDescriptor> images;
  BalancerConfig balancer;
  LoadModel load_model;
  std::vector<ScenarioEvent> events;
};

static constexpr std::string_view kScenarioHeader = "evop-scenario v1";

/// Providers used when a scenario names none: one free bounded private
/// cloud and one billed elastic public cloud.
std::vector<ProviderDescriptor> default_providers();

/// Collects every problem, not just the first.
std::vector<std::string> validate_scenario(const ScenarioSpec& spec);

/// Parses and validates. Throws ParseError for an unreadable file or bad
/// header, ValidationError with all collected problems otherwise.
ScenarioSpec parse_scenario(const std::string& path);
ScenarioSpec parse_scenario_text(const std::string& text, const std::string& name);

std::string format_scenario(const ScenarioSpec& spec);

struct TraceDiff {
  bool equal = true;
  std::size_t line = 0;     // 1-based first divergent line
  std::string left;
  std::string right;
};

/// First divergent line between two trace files.
TraceDiff diff_traces(const std::string& path_a, const std::string& path_b);
TraceDiff diff_trace_text(const std::string& a, const std::string& b);

}  // namespace evop
