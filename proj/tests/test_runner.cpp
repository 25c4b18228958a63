#include <doctest.h>

#include "evop/runner.hpp"
#include "helpers.hpp"

using namespace evop;
using namespace evop::testing;

TEST_CASE("fill scenario: everything fits privately, nothing is billed") {
  auto spec = load_scenario("fill");
  auto result = run_scenario(spec);
  CHECK(result.report.sessions_total == 4);
  CHECK(result.report.sessions_first_placement.at("private-cloud") == 4);
  CHECK(result.report.sessions_first_placement.at("public-cloud") == 0);
  CHECK(result.report.total_cost == 0.0);
  CHECK(result.report.saturation_events == 0);
  CHECK(result.report.max_concurrent_public == 0);
  CHECK(result.final_assignment.empty());  // all departed
  CHECK(result.protocol_violations.empty());
}

TEST_CASE("overflow scenario matches the hand-stepped placement") {
  auto spec = load_scenario("overflow");
  auto result = run_scenario(spec);
  CHECK(result.report.sessions_first_placement.at("private-cloud") == 2);
  CHECK(result.report.sessions_first_placement.at("public-cloud") == 1);
  CHECK(result.report.saturation_events == 1);
  CHECK(result.report.launched_by_provider.at("public-cloud") == 1);
  CHECK(result.report.total_cost == doctest::Approx(1.0));
  CHECK(result.final_assignment.size() == 3);
}

TEST_CASE("the report reconciles with the trace on every bundled scenario") {
  for (const auto& name : bundled_scenarios()) {
    CAPTURE(name);
    auto spec = load_scenario(name);
    auto result = run_scenario(spec);
    auto check = check_report_reconciles(result.report, result.trace_lines);
    CHECK_MESSAGE(check.ok, name, ": ", check.failure);
    CHECK(result.report.total_cost ==
          doctest::Approx(recompute_cost(spec, result.trace_lines)));
    CHECK(result.protocol_violations.empty());

    auto capacity = check_capacity(spec, result.trace_lines);
    CHECK_MESSAGE(capacity.ok, name, ": ", capacity.failure);
    auto private_first = check_private_first(spec, result.trace_lines);
    CHECK_MESSAGE(private_first.ok, name, ": ", private_first.failure);

    // conservation: teardown leaves no instance running
    for (const auto& [provider, launched] : result.report.launched_by_provider) {
      CHECK(result.report.terminated_by_provider.at(provider) == launched);
    }
  }
}

TEST_CASE("a crash injected into a quiet stretch does not change the outcome") {
  auto spec = load_scenario("overflow");
  auto baseline = run_scenario(spec);

  RunOptions options;
  options.extra_crashes.push_back({.at = 150, .restart_delay = 15});
  auto crashed = run_scenario(spec, options);
  CHECK(crashed.final_assignment == baseline.final_assignment);
  CHECK(crashed.final_epochs == baseline.final_epochs);
  CHECK(crashed.protocol_violations.empty());
}

TEST_CASE("a client arriving during downtime retries until the broker is back") {
  ScenarioSpec spec = load_scenario("overflow");
  ScenarioEvent crash;
  crash.at = 95;
  crash.kind = ScenarioEvent::Kind::BrokerCrash;
  crash.restart_delay = 20;
  spec.events.push_back(crash);
  ScenarioEvent arrival;
  arrival.at = 100;  // lands mid-outage
  arrival.kind = ScenarioEvent::Kind::Arrival;
  arrival.ref = "late";
  arrival.model_id = "topmodel-stub";
  spec.events.push_back(arrival);

  auto result = run_scenario(spec);
  // the late session exists despite arriving while the broker was down
  CHECK(result.report.sessions_total == 4);
  CHECK(result.final_assignment.size() == 4);
  bool retried = false;
  for (const auto& event : parse_trace(result.trace_lines)) {
    if (event.kind == "client-retry" && event.subject == "late") retried = true;
  }
  CHECK(retried);
}

TEST_CASE("a manager crash between verdict and boot still completes the swap") {
  auto spec = load_scenario("cpu-fault");
  auto baseline = run_scenario(spec);

  // verdict fires at 150, the replacement boots at 180; kill the manager in
  // between and the rebuilt balancer must resume the half-done replacement
  RunOptions options;
  options.extra_crashes.push_back({.at = 160, .restart_delay = 15});
  auto crashed = run_scenario(spec, options);
  CHECK(crashed.final_assignment == baseline.final_assignment);
  CHECK(crashed.protocol_violations.empty());
  std::uint64_t verdicts = 0;
  for (const auto& event : parse_trace(crashed.trace_lines)) {
    if (event.kind == "verdict") ++verdicts;
  }
  CHECK(verdicts == 1);  // the rebuilt balancer resumes, it does not re-judge
}

TEST_CASE("an instance crash during manager downtime is found on restart") {
  ScenarioSpec spec = load_scenario("fill");
  spec.name = "crash-while-down";
  ScenarioEvent down;
  down.at = 60;
  down.kind = ScenarioEvent::Kind::BrokerCrash;
  down.restart_delay = 20;
  spec.events.push_back(down);
  ScenarioEvent dead;
  dead.at = 70;  // nobody is watching
  dead.kind = ScenarioEvent::Kind::Fault;
  dead.fault.kind = FaultKind::Crash;
  dead.fault.instance_id = "i-0001";
  spec.events.push_back(dead);

  auto result = run_scenario(spec);
  CHECK(result.report.verdicts_by_rule.at("crash_detected") == 1);
  CHECK(result.report.migrations_by_reason.at("degradation_replacement") == 4);
  for (const auto& [session, instance] : result.final_assignment) {
    CHECK(instance != "i-0001");
  }
}

TEST_CASE("placement walks every provider of a tier before overflowing") {
  ScenarioSpec spec = load_scenario("overflow");
  spec.name = "two-private";
  spec.providers.clear();
  for (const char* id : {"priv-a", "priv-b"}) {
    ProviderDescriptor p;
    p.provider_id = id;
    p.kind = ProviderKind::Private;
    p.capacity = 1;
    p.boot_time = 30;
    spec.providers.push_back(p);
  }
  ProviderDescriptor pub;
  pub.provider_id = "public-cloud";
  pub.kind = ProviderKind::Public;
  pub.cost_rate = 1.0;
  pub.boot_time = 30;
  spec.providers.push_back(pub);

  auto result = run_scenario(spec);
  CHECK(result.report.sessions_first_placement.at("priv-a") == 1);
  CHECK(result.report.sessions_first_placement.at("priv-b") == 1);
  CHECK(result.report.sessions_first_placement.at("public-cloud") == 1);
  CHECK(result.report.saturation_events == 1);
}

TEST_CASE("seed override changes the trace hash of a jittered scenario") {
  auto spec = load_scenario("jitter-overflow");
  RunOptions a, b;
  a.seed_override = 11;
  b.seed_override = 22;
  auto run_a = run_scenario(spec, a);
  auto run_b = run_scenario(spec, b);
  CHECK(run_a.report.trace_hash != run_b.report.trace_hash);
  // ...but the policy outcome is seed-independent
  CHECK(run_a.report.sessions_first_placement.at("private-cloud") == 2);
  CHECK(run_b.report.sessions_first_placement.at("private-cloud") == 2);
}

TEST_CASE("the journal left behind by a run replays to the final state") {
  auto spec = load_scenario("crash-recovery");
  auto result = run_scenario(spec);
  auto recovery = SessionJournal::replay(result.journal_bytes);
  std::map<std::string, std::string> from_journal;
  for (const auto& [id, session] : recovery.sessions) {
    if (session.state == SessionState::Closed) continue;
    from_journal[id] = session.instance_id;
  }
  CHECK(from_journal == result.final_assignment);
}
