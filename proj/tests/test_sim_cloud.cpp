#include <doctest.h>

#include <random>

#include "evop/event_loop.hpp"
#include "evop/sim_cloud.hpp"

using namespace evop;

namespace {

// Independent billing oracle: step through billing periods one at a time
// until the elapsed span is covered; a launched instance owes at least one.
double billing_oracle(Duration elapsed, Duration granularity, double rate) {
  std::uint64_t units = 0;
  Duration covered = 0;
  while (covered < elapsed) {
    units += 1;
    covered += granularity;
  }
  if (units == 0) units = 1;
  return static_cast<double>(units) * rate;
}

struct SimFixture {
  ModelLibrary library;
  TraceSink trace;
  EventLoop loop{&trace};
  SimCloud sim{loop, &trace, library, LoadModel{}, 10};

  SimFixture() {
    ImageDescriptor image;
    image.image_id = "img";
    image.model_ids = {"topmodel-stub"};
    image.max_sessions = 4;
    library.register_image(image);

    ProviderDescriptor private_cloud;
    private_cloud.provider_id = "priv";
    private_cloud.kind = ProviderKind::Private;
    private_cloud.capacity = 2;
    private_cloud.cost_rate = 0.0;
    private_cloud.boot_time = 30;
    sim.add_provider(private_cloud);

    ProviderDescriptor public_cloud;
    public_cloud.provider_id = "pub";
    public_cloud.kind = ProviderKind::Public;
    public_cloud.cost_rate = 1.0;
    public_cloud.billing_granularity = 3600;
    public_cloud.boot_time = 30;
    sim.add_provider(public_cloud);
  }
};

}  // namespace

TEST_CASE("launch respects private capacity") {
  SimFixture f;
  auto a = f.sim.launch("priv", "img");
  CHECK(a.state == InstanceState::Pending);
  CHECK(f.sim.launch("priv", "img").instance_id != a.instance_id);
  // 2/2 used, third launch must overflow-signal
  CHECK_THROWS_AS(f.sim.launch("priv", "img"), Error);
  try {
    f.sim.launch("priv", "img");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CapacityExceeded);
  }
}

TEST_CASE("public providers are elastic") {
  SimFixture f;
  for (int i = 0; i < 50; ++i) {
    f.sim.launch("pub", "img");
  }
  CHECK_NOTHROW(f.sim.launch("pub", "img"));
}

TEST_CASE("launch errors") {
  SimFixture f;
  CHECK_THROWS_AS(f.sim.launch("priv", "missing-img"), Error);
  CHECK_THROWS_AS(f.sim.launch("nowhere", "img"), Error);
}

TEST_CASE("terminated instance alive 61 minutes bills two hours") {
  SimFixture f;
  auto record = f.sim.launch("pub", "img");
  f.loop.run_until(61 * 60);
  f.sim.terminate(record.instance_id);
  CHECK(f.sim.accrued_cost() ==
        doctest::Approx(billing_oracle(61 * 60, 3600, 1.0)));
  CHECK(f.sim.accrued_cost() == doctest::Approx(2.0));
}

TEST_CASE("terminating a pending instance still bills one granularity unit") {
  SimFixture f;
  auto record = f.sim.launch("pub", "img");
  f.loop.run_until(10);  // still pending (boot takes 30)
  CHECK(f.sim.find_instance(record.instance_id)->state == InstanceState::Pending);
  f.sim.terminate(record.instance_id);
  CHECK(f.sim.accrued_cost() == doctest::Approx(billing_oracle(10, 3600, 1.0)));
  CHECK(f.sim.accrued_cost() == doctest::Approx(1.0));
}

TEST_CASE("double terminate is rejected") {
  SimFixture f;
  auto record = f.sim.launch("priv", "img");
  f.sim.terminate(record.instance_id);
  try {
    f.sim.terminate(record.instance_id);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AlreadyTerminated);
  }
}

TEST_CASE("boot fires exactly boot_time after launch") {
  SimFixture f;
  auto record = f.sim.launch("priv", "img");
  f.loop.run_until(29);
  CHECK(f.sim.find_instance(record.instance_id)->state == InstanceState::Pending);
  f.loop.run_until(30);
  CHECK(f.sim.find_instance(record.instance_id)->state == InstanceState::Running);
}

TEST_CASE("idle instance samples are all zero") {
  SimFixture f;
  auto record = f.sim.launch("priv", "img");
  f.loop.run_until(50);
  auto sample = f.sim.poll_metrics(record.instance_id);
  CHECK(sample.cpu == 0.0);
  CHECK(sample.net_in == 0);
  CHECK(sample.net_out == 0);
}

TEST_CASE("cpu follows the session-count load model") {
  SimFixture f;
  auto record = f.sim.launch("priv", "img");
  f.loop.run_until(30);
  const auto& id = record.instance_id;

  // oracle: cpu = min(1, k * per_session_cpu), evaluated directly
  auto cpu_oracle = [&](std::uint64_t k) {
    double v = static_cast<double>(k) * f.sim.load_model().per_session_cpu;
    return v > 1.0 ? 1.0 : v;
  };

  for (int i = 0; i < 3; ++i) f.sim.assign_session(id);
  f.loop.run_until(40);
  CHECK(f.sim.poll_metrics(id).cpu == doctest::Approx(cpu_oracle(3)));

  for (int i = 0; i < 4; ++i) f.sim.assign_session(id);  // 7 sessions, clamps
  f.loop.run_until(50);
  CHECK(f.sim.poll_metrics(id).cpu == doctest::Approx(1.0));
  CHECK(f.sim.poll_metrics(id).cpu == doctest::Approx(cpu_oracle(7)));
}

TEST_CASE("repeated polls within one interval return the identical sample") {
  SimFixture f;
  auto record = f.sim.launch("priv", "img");
  f.loop.run_until(42);
  auto first = f.sim.poll_metrics(record.instance_id);
  f.sim.assign_session(record.instance_id);
  f.loop.run_until(47);  // same interval [40, 50)
  auto second = f.sim.poll_metrics(record.instance_id);
  CHECK(first.at == second.at);
  CHECK(first.cpu == second.cpu);
}

TEST_CASE("poll preconditions") {
  SimFixture f;
  auto record = f.sim.launch("priv", "img");
  try {
    f.sim.poll_metrics(record.instance_id);  // still pending
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotRunning);
  }
  try {
    f.sim.poll_metrics("i-9999");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownInstance);
  }
}

TEST_CASE("cpu saturation pins samples at 1.0 from the first full interval") {
  SimFixture f;
  auto record = f.sim.launch("priv", "img");
  f.loop.run_until(100);

  FaultInjection fault;
  fault.instance_id = record.instance_id;
  fault.kind = FaultKind::CpuSaturation;
  fault.start = 100;
  f.sim.inject_fault(fault);

  f.loop.run_until(105);
  CHECK(f.sim.poll_metrics(record.instance_id).cpu == 0.0);  // interval [90,100)
  f.loop.run_until(110);
  CHECK(f.sim.poll_metrics(record.instance_id).cpu == doctest::Approx(1.0));
  f.loop.run_until(200);
  CHECK(f.sim.poll_metrics(record.instance_id).cpu == doctest::Approx(1.0));
}

TEST_CASE("a bounded fault stops pinning after it expires") {
  SimFixture f;
  auto record = f.sim.launch("priv", "img");
  f.loop.run_until(100);
  FaultInjection fault;
  fault.instance_id = record.instance_id;
  fault.kind = FaultKind::CpuSaturation;
  fault.start = 100;
  fault.duration = 20;  // covers [100, 120)
  f.sim.inject_fault(fault);

  f.loop.run_until(120);
  CHECK(f.sim.poll_metrics(record.instance_id).cpu == doctest::Approx(1.0));
  f.loop.run_until(130);
  CHECK(f.sim.poll_metrics(record.instance_id).cpu == 0.0);
}

TEST_CASE("blackhole zeroes outbound while inbound reflects traffic") {
  SimFixture f;
  auto record = f.sim.launch("priv", "img");
  f.loop.run_until(80);

  FaultInjection fault;
  fault.instance_id = record.instance_id;
  fault.kind = FaultKind::NetworkBlackhole;
  fault.start = 80;
  f.sim.inject_fault(fault);

  f.loop.run_until(95);
  f.sim.deliver_requests(record.instance_id, "topmodel-stub", 4);
  f.loop.run_until(100);
  auto sample = f.sim.poll_metrics(record.instance_id);
  CHECK(sample.net_in == 4 * f.sim.load_model().per_request_bytes_in);
  CHECK(sample.net_out == 0);
  CHECK(sample.disk_read == 4 * f.sim.load_model().disk_bytes_per_request);
}

TEST_CASE("crash silently terminates; discovery is the poller's problem") {
  SimFixture f;
  auto record = f.sim.launch("priv", "img");
  f.loop.run_until(50);

  FaultInjection fault;
  fault.instance_id = record.instance_id;
  fault.kind = FaultKind::Crash;
  fault.start = 60;
  f.sim.inject_fault(fault);

  f.loop.run_until(59);
  CHECK(f.sim.find_instance(record.instance_id)->state == InstanceState::Running);
  f.loop.run_until(60);
  CHECK(f.sim.find_instance(record.instance_id)->state ==
        InstanceState::Terminated);
  CHECK(f.sim.list_instances(std::nullopt).empty());
  CHECK_THROWS_AS(f.sim.poll_metrics(record.instance_id), Error);
}

TEST_CASE("list_instances orders by launch time then id and filters") {
  SimFixture f;
  CHECK(f.sim.list_instances(std::nullopt).empty());
  auto a = f.sim.launch("priv", "img");
  f.loop.run_until(5);
  auto b = f.sim.launch("pub", "img");
  auto all = f.sim.list_instances(std::nullopt);
  REQUIRE(all.size() == 2);
  CHECK(all[0].instance_id == a.instance_id);
  CHECK(all[1].instance_id == b.instance_id);
  CHECK(f.sim.list_instances(std::string("pub")).size() == 1);
  f.sim.terminate(b.instance_id);
  CHECK(f.sim.list_instances(std::string("pub")).empty());
  CHECK_THROWS_AS(f.sim.list_instances(std::string("nope")), Error);
}

TEST_CASE("property: accrued cost is non-decreasing in virtual time") {
  SimFixture f;
  std::mt19937_64 rng(11);
  std::vector<std::string> live;
  double last_cost = 0.0;
  for (VirtualTime t = 0; t <= 20000; t += 500) {
    f.loop.run_until(t);
    if (rng() % 3 == 0) {
      live.push_back(f.sim.launch("pub", "img").instance_id);
    } else if (!live.empty() && rng() % 3 == 1) {
      f.sim.terminate(live.back());
      live.pop_back();
    }
    double cost = f.sim.accrued_cost();
    CHECK(cost >= last_cost);
    last_cost = cost;
  }
}

TEST_CASE("a run that never touches a billed provider costs nothing") {
  SimFixture f;
  auto a = f.sim.launch("priv", "img");
  f.loop.run_until(5000);
  f.sim.terminate(a.instance_id);
  CHECK(f.sim.accrued_cost() == 0.0);
}

TEST_CASE("property: state histories respect the transition graph") {
  SimFixture f;
  auto a = f.sim.launch("priv", "img");
  f.loop.run_until(40);
  f.sim.mark(a.instance_id, InstanceState::Degraded);
  f.sim.mark(a.instance_id, InstanceState::Draining);
  f.sim.terminate(a.instance_id);

  auto b = f.sim.launch("priv", "img");
  f.sim.terminate(b.instance_id);  // terminated while pending

  for (const auto& id : {a.instance_id, b.instance_id}) {
    const auto& history = f.sim.state_history(id);
    REQUIRE(!history.empty());
    CHECK(history.front().second == InstanceState::Pending);
    for (std::size_t i = 1; i < history.size(); ++i) {
      CHECK(history[i - 1].first <= history[i].first);
      CHECK(instance_transition_allowed(history[i - 1].second, history[i].second));
    }
  }
}

TEST_CASE("invalid control-plane transitions are rejected") {
  SimFixture f;
  auto a = f.sim.launch("priv", "img");
  CHECK_THROWS_AS(f.sim.mark(a.instance_id, InstanceState::Degraded), Error);
}
