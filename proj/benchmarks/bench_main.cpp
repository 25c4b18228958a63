#include <benchmark/benchmark.h>

#include <random>

#include "evop/balancer.hpp"
#include "evop/broker.hpp"
#include "evop/event_loop.hpp"
#include "evop/runner.hpp"
#include "evop/scenario.hpp"
#include "evop/session_journal.hpp"
#include "evop/sim_cloud.hpp"

namespace {

using namespace evop;

ScenarioSpec churn_scenario(std::size_t sessions) {
  ScenarioSpec spec;
  spec.name = "bench-churn";
  spec.duration = 20 + sessions * 12;
  ProviderDescriptor priv;
  priv.provider_id = "private-cloud";
  priv.kind = ProviderKind::Private;
  priv.capacity = 8;
  priv.boot_time = 30;
  ProviderDescriptor pub;
  pub.provider_id = "public-cloud";
  pub.kind = ProviderKind::Public;
  pub.cost_rate = 1.0;
  pub.boot_time = 30;
  spec.providers = {priv, pub};
  ImageDescriptor image;
  image.image_id = "img";
  image.model_ids = {"m"};
  image.max_sessions = 4;
  spec.images = {image};
  for (std::size_t i = 0; i < sessions; ++i) {
    ScenarioEvent arrive;
    arrive.at = 5 + i * 6;
    arrive.kind = ScenarioEvent::Kind::Arrival;
    arrive.ref = "s" + std::to_string(i);
    arrive.model_id = "m";
    spec.events.push_back(arrive);
    ScenarioEvent depart;
    depart.at = arrive.at + sessions * 4;
    depart.kind = ScenarioEvent::Kind::Departure;
    depart.ref = arrive.ref;
    spec.events.push_back(depart);
  }
  return spec;
}

void BM_scenario_run(benchmark::State& state) {
  auto spec = churn_scenario(static_cast<std::size_t>(state.range(0)));
  std::size_t events = 0;
  for (auto _ : state) {
    auto result = run_scenario(spec);
    events += result.trace_lines.size();
    benchmark::DoNotOptimize(result.report.trace_hash);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(events));
}
BENCHMARK(BM_scenario_run)->Arg(16)->Arg(64)->Arg(256);

void BM_journal_append(benchmark::State& state) {
  Session session;
  session.session_id = "s-0001";
  session.model_id = "m";
  session.instance_id = "i-0001";
  for (auto _ : state) {
    SessionJournal journal;
    for (int i = 0; i < state.range(0); ++i) {
      session.epoch = static_cast<std::uint64_t>(i + 1);
      journal.append_session(session);
    }
    benchmark::DoNotOptimize(journal.size());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_journal_append)->Arg(128)->Arg(1024);

void BM_journal_replay(benchmark::State& state) {
  SessionJournal journal;
  for (int i = 0; i < state.range(0); ++i) {
    Session session;
    session.session_id = "s-" + std::to_string(i % 64);
    session.model_id = "m";
    session.instance_id = "i-" + std::to_string(i % 8);
    session.epoch = static_cast<std::uint64_t>(i + 1);
    journal.append_session(session);
  }
  for (auto _ : state) {
    auto recovery = SessionJournal::replay(journal.bytes());
    benchmark::DoNotOptimize(recovery.sessions.size());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_journal_replay)->Arg(128)->Arg(1024);

void BM_placement(benchmark::State& state) {
  ModelLibrary library;
  ImageDescriptor image;
  image.image_id = "img";
  image.model_ids = {"m"};
  image.max_sessions = 1u << 20;  // never fills: measures selection cost
  library.register_image(image);

  EventLoop loop;
  SimCloud sim(loop, nullptr, library);
  ProviderDescriptor priv;
  priv.provider_id = "private-cloud";
  priv.kind = ProviderKind::Private;
  priv.capacity = static_cast<std::uint64_t>(state.range(0));
  priv.boot_time = 0;
  sim.add_provider(priv);
  for (int i = 0; i < state.range(0); ++i) {
    sim.launch("private-cloud", "img");
  }
  loop.run_until(1);

  SessionJournal journal;
  ResourceBroker broker(loop, nullptr, library, sim, journal);
  LoadBalancer balancer(loop, nullptr, library, sim, {});
  balancer.set_broker(&broker);
  broker.set_placement(&balancer);

  for (auto _ : state) {
    benchmark::DoNotOptimize(balancer.place("m"));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_placement)->Arg(4)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
