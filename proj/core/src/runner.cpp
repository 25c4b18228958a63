#include "evop/runner.hpp"

#include <algorithm>
#include <deque>
#include <memory>
#include <random>
#include <sstream>

#include "evop/balancer.hpp"
#include "evop/broker.hpp"
#include "evop/event_loop.hpp"
#include "evop/messages.hpp"
#include "evop/session_journal.hpp"
#include "evop/sim_cloud.hpp"
#include "evop/trace.hpp"
#include "evop/trace_query.hpp"

namespace evop {

namespace {

constexpr Duration kRetryBase = 1;
constexpr Duration kRetryCap = 30;

/// Drives one scenario: owns the loop, the simulated cloud, the manager
/// (broker + balancer) and the scripted clients. The manager can die and
/// restart mid-run; everything else survives it, exactly like the real
/// deployment where only the Infrastructure Manager instance is replaced.
class ScenarioRunner {
 public:
  ScenarioRunner(ScenarioSpec spec, RunOptions options)
      : spec_(std::move(spec)), options_(std::move(options)), loop_(&trace_) {
    if (options_.seed_override) {
      spec_.seed = *options_.seed_override;
    }
    rng_.seed(spec_.seed);
  }

  RunResult run();

 private:
  struct Client {
    std::string ref;
    std::string model_id;
    enum class State { Idle, HelloPending, Active, Closed };
    State state = State::Idle;
    std::string session_id;
    std::string address;
    std::uint64_t epoch = 0;
    std::uint64_t retry_attempt = 0;
    bool bye_requested = false;
    std::deque<std::uint64_t> queued_bursts;
    std::unique_ptr<ClientChannel> channel;
  };

  std::uint64_t rng_below(std::uint64_t bound) {
    return bound == 0 ? 0 : rng_() % bound;
  }

  Duration backoff_delay(std::uint64_t attempt) {
    auto shift = attempt > 6 ? 6 : (attempt == 0 ? 0 : attempt - 1);
    Duration delay = std::min<Duration>(kRetryCap, kRetryBase << shift);
    if (spec_.retry_jitter > 0) {
      delay += rng_below(spec_.retry_jitter + 1);
    }
    return delay;
  }

  void start_manager(bool recovering);
  void crash_manager(Duration restart_delay);
  void schedule_tick(VirtualTime at);
  void schedule_events();

  void client_hello(const std::string& ref);
  void client_bye(const std::string& ref);
  void client_burst(const std::string& ref, std::uint64_t count);
  void client_reconnect(const std::string& ref);
  void on_frame(const std::string& ref, const std::string& encoded);
  void flush_client_backlog(Client& client);
  void deliver_to_address(const Client& client, std::uint64_t count);

  MetricsReport build_report() const;

  ScenarioSpec spec_;
  RunOptions options_;
  TraceSink trace_;
  EventLoop loop_;
  ModelLibrary library_;
  std::unique_ptr<SimCloud> sim_;
  SessionJournal journal_;
  std::unique_ptr<ResourceBroker> broker_;
  std::unique_ptr<LoadBalancer> balancer_;
  std::map<std::string, Client> clients_;
  std::map<std::string, std::string> address_to_instance_;
  std::mt19937_64 rng_;
  bool manager_up_ = false;
  std::vector<std::string> violations_;
};

void ScenarioRunner::start_manager(bool recovering) {
  broker_ = std::make_unique<ResourceBroker>(loop_, &trace_, library_, *sim_,
                                             journal_);
  broker_->set_binding_listener(
      [this](const std::string& instance_id, bool bound) {
        if (bound) {
          sim_->assign_session(instance_id);
        } else {
          sim_->release_session(instance_id);
        }
      });
  balancer_ = std::make_unique<LoadBalancer>(loop_, &trace_, library_, *sim_,
                                             spec_.balancer);
  balancer_->set_broker(broker_.get());
  broker_->set_placement(balancer_.get());
  if (recovering) {
    broker_->recover();
    broker_->compact_journal();
    balancer_->rebuild();
  }
  manager_up_ = true;
}

void ScenarioRunner::crash_manager(Duration restart_delay) {
  if (!manager_up_) {
    return;  // already down; the earlier restart stands
  }
  manager_up_ = false;
  broker_.reset();
  balancer_.reset();

  // Channels dropped with the manager; live clients reconnect with backoff.
  for (auto& [ref, client] : clients_) {
    if (client.state != Client::State::Active) continue;
    client.retry_attempt = 1;
    auto name = ref;
    loop_.schedule(loop_.now() + backoff_delay(client.retry_attempt),
                   "reconnect", name, "", [this, name] { client_reconnect(name); });
  }

  loop_.schedule(loop_.now() + restart_delay, "broker-restart", "broker", "",
                 [this] {
                   if (manager_up_) return;
                   start_manager(true);
                 });
}

void ScenarioRunner::schedule_tick(VirtualTime at) {
  if (at > spec_.duration) return;
  loop_.schedule(at, "tick", "balancer", "", [this, at] {
    if (manager_up_) {
      balancer_->monitor_tick(loop_.now());
    }
    schedule_tick(at + spec_.balancer.monitor_interval);
  });
}

void ScenarioRunner::schedule_events() {
  // Arrival jitter is the only randomness in the script; it is drawn up
  // front, in file order, so one seed fixes the whole timeline.
  std::map<std::string, VirtualTime> effective_arrival;
  std::vector<VirtualTime> effective_at(spec_.events.size());
  for (std::size_t i = 0; i < spec_.events.size(); ++i) {
    const auto& event = spec_.events[i];
    VirtualTime at = event.at;
    switch (event.kind) {
      case ScenarioEvent::Kind::Arrival:
        if (spec_.arrival_jitter > 0) {
          at += rng_below(spec_.arrival_jitter + 1);
        }
        effective_arrival[event.ref] = at;
        break;
      case ScenarioEvent::Kind::Departure:
      case ScenarioEvent::Kind::Burst: {
        auto it = effective_arrival.find(event.ref);
        if (it != effective_arrival.end()) {
          at = std::max(at, it->second);
        }
        break;
      }
      default:
        break;
    }
    effective_at[i] = std::min(at, spec_.duration);
  }

  for (std::size_t i = 0; i < spec_.events.size(); ++i) {
    const auto& event = spec_.events[i];
    auto at = effective_at[i];
    switch (event.kind) {
      case ScenarioEvent::Kind::Arrival: {
        auto& client = clients_[event.ref];
        client.ref = event.ref;
        client.model_id = event.model_id;
        auto ref = event.ref;
        client.channel = std::make_unique<ClientChannel>(
            [this, ref](const std::string& encoded) {
              loop_.schedule(loop_.now(), "frame", ref, encoded,
                             [this, ref, encoded] { on_frame(ref, encoded); });
            });
        loop_.schedule(at, "arrive", event.ref, "model=" + event.model_id,
                       [this, ref] { client_hello(ref); });
        break;
      }
      case ScenarioEvent::Kind::Departure: {
        auto ref = event.ref;
        loop_.schedule(at, "depart", ref, "", [this, ref] { client_bye(ref); });
        break;
      }
      case ScenarioEvent::Kind::Burst: {
        auto ref = event.ref;
        auto count = event.count;
        loop_.schedule(at, "burst", ref, "count=" + std::to_string(count),
                       [this, ref, count] { client_burst(ref, count); });
        break;
      }
      case ScenarioEvent::Kind::Fault: {
        auto fault = event.fault;
        fault.start = at;
        loop_.schedule(at, "fault-inject", fault.instance_id,
                       "kind=" + std::string(to_string(fault.kind)),
                       [this, fault] {
                         try {
                           sim_->inject_fault(fault);
                         } catch (const Error& e) {
                           trace_.emit(loop_.now(), "error", fault.instance_id,
                                       std::string("code=") +
                                           std::string(to_string(e.code())));
                         }
                       });
        break;
      }
      case ScenarioEvent::Kind::BrokerCrash: {
        auto restart = event.restart_delay;
        loop_.schedule(at, "broker-crash", "broker",
                       "restart=" + std::to_string(restart),
                       [this, restart] { crash_manager(restart); });
        break;
      }
    }
  }

  for (const auto& crash : options_.extra_crashes) {
    auto restart = crash.restart_delay;
    loop_.schedule(crash.at, "broker-crash", "broker",
                   "restart=" + std::to_string(restart) + " injected=1",
                   [this, restart] { crash_manager(restart); });
  }
}

void ScenarioRunner::client_hello(const std::string& ref) {
  auto& client = clients_.at(ref);
  if (client.state == Client::State::Closed) return;
  if (!manager_up_) {
    client.state = Client::State::HelloPending;
    client.retry_attempt += 1;
    loop_.schedule(loop_.now() + backoff_delay(client.retry_attempt),
                   "client-retry", ref, "hello",
                   [this, ref] { client_hello(ref); });
    return;
  }
  client.retry_attempt = 0;
  client.state = Client::State::HelloPending;
  try {
    broker_->handle_hello(client.model_id, client.channel.get());
  } catch (const Error& e) {
    trace_.emit(loop_.now(), "error", ref,
                "code=" + std::string(to_string(e.code())));
    Frame frame;
    frame.type = Frame::Type::Error;
    frame.code = std::string(to_string(e.code()));
    frame.detail = e.what();
    client.channel->send(frame);
  }
}

void ScenarioRunner::client_bye(const std::string& ref) {
  auto& client = clients_.at(ref);
  switch (client.state) {
    case Client::State::Closed:
      return;
    case Client::State::Idle:
    case Client::State::HelloPending:
      client.bye_requested = true;  // sent once the assignment lands
      return;
    case Client::State::Active:
      break;
  }
  if (!manager_up_) {
    client.retry_attempt += 1;
    loop_.schedule(loop_.now() + backoff_delay(client.retry_attempt),
                   "client-retry", ref, "bye", [this, ref] { client_bye(ref); });
    return;
  }
  client.retry_attempt = 0;
  try {
    broker_->handle_bye(client.session_id);
  } catch (const Error& e) {
    trace_.emit(loop_.now(), "error", ref,
                "code=" + std::string(to_string(e.code())));
  }
  client.state = Client::State::Closed;
}

void ScenarioRunner::deliver_to_address(const Client& client,
                                        std::uint64_t count) {
  auto it = address_to_instance_.find(client.address);
  if (it == address_to_instance_.end()) {
    for (const auto& record : sim_->all_records()) {
      address_to_instance_[record.address] = record.instance_id;
    }
    it = address_to_instance_.find(client.address);
  }
  if (it == address_to_instance_.end()) return;
  sim_->deliver_requests(it->second, client.model_id, count);
}

void ScenarioRunner::client_burst(const std::string& ref, std::uint64_t count) {
  auto& client = clients_.at(ref);
  switch (client.state) {
    case Client::State::Closed:
      return;
    case Client::State::Idle:
    case Client::State::HelloPending:
      client.queued_bursts.push_back(count);
      return;
    case Client::State::Active:
      deliver_to_address(client, count);
      return;
  }
}

void ScenarioRunner::client_reconnect(const std::string& ref) {
  auto& client = clients_.at(ref);
  if (client.state != Client::State::Active) return;
  if (!manager_up_) {
    client.retry_attempt += 1;
    loop_.schedule(loop_.now() + backoff_delay(client.retry_attempt),
                   "reconnect", ref, "", [this, ref] { client_reconnect(ref); });
    return;
  }
  client.retry_attempt = 0;
  broker_->handle_ping(client.session_id, client.channel.get());
}

void ScenarioRunner::flush_client_backlog(Client& client) {
  while (!client.queued_bursts.empty()) {
    auto count = client.queued_bursts.front();
    client.queued_bursts.pop_front();
    deliver_to_address(client, count);
  }
  if (client.bye_requested && client.state == Client::State::Active) {
    client.bye_requested = false;
    client_bye(client.ref);
  }
}

void ScenarioRunner::on_frame(const std::string& ref,
                              const std::string& encoded) {
  auto& client = clients_.at(ref);
  auto frame = decode_frame(encoded);
  switch (frame.type) {
    case Frame::Type::Assign:
      if (frame.epoch < client.epoch) {
        violations_.push_back(ref + ": ASSIGN epoch " +
                              std::to_string(frame.epoch) + " < " +
                              std::to_string(client.epoch));
      }
      client.session_id = frame.session_id;
      client.address = frame.address;
      client.epoch = frame.epoch;
      if (client.state == Client::State::HelloPending) {
        client.state = Client::State::Active;
      }
      flush_client_backlog(client);
      break;
    case Frame::Type::Update:
      if (frame.epoch <= client.epoch) {
        violations_.push_back(ref + ": UPDATE epoch " +
                              std::to_string(frame.epoch) +
                              " not above " + std::to_string(client.epoch));
      }
      client.address = frame.address;
      client.epoch = frame.epoch;
      break;
    case Frame::Type::Error:
      if (client.state != Client::State::Active) {
        client.state = Client::State::Closed;
      }
      break;
    default:
      violations_.push_back(ref + ": unexpected frame " +
                            std::string(to_string(frame.type)));
      break;
  }
}

MetricsReport ScenarioRunner::build_report() const {
  MetricsReport report;
  report.scenario = spec_.name;
  report.seed = spec_.seed;
  report.duration = spec_.duration;
  for (const auto& provider : spec_.providers) {
    report.sessions_first_placement[provider.provider_id] = 0;
    report.launched_by_provider[provider.provider_id] = 0;
    report.terminated_by_provider[provider.provider_id] = 0;
  }
  report.migrations_by_reason = {{"degradation_replacement", 0},
                                 {"rebalance", 0},
                                 {"reverse_migration", 0}};
  report.verdicts_by_rule = {
      {"sustained_cpu", 0}, {"blackhole", 0}, {"crash_detected", 0}};

  std::map<std::string, std::string> instance_provider;
  for (const auto& event : parse_trace(trace_.lines())) {
    if (event.kind == "launch") {
      instance_provider[event.subject] = event.fields.at("provider");
    } else if (event.kind == "assign") {
      report.sessions_total += 1;
      auto it = instance_provider.find(event.fields.at("instance"));
      if (it != instance_provider.end()) {
        report.sessions_first_placement[it->second] += 1;
      }
    } else if (event.kind == "update") {
      report.migrations_by_reason[event.fields.at("reason")] += 1;
    } else if (event.kind == "place") {
      if (event.fields.at("saturated") == "1") {
        report.saturation_events += 1;
      }
    } else if (event.kind == "place-failed") {
      report.placement_failures += 1;
    } else if (event.kind == "verdict") {
      report.verdicts_by_rule[event.fields.at("rule")] += 1;
    }
  }

  for (const auto& [provider, n] : sim_->usage().launched_by_provider) {
    report.launched_by_provider[provider] = n;
  }
  for (const auto& [provider, n] : sim_->usage().terminated_by_provider) {
    report.terminated_by_provider[provider] = n;
  }
  report.max_concurrent_public = sim_->usage().max_concurrent_public;
  report.total_cost = sim_->accrued_cost();
  report.trace_hash = trace_.hash_hex();
  return report;
}

RunResult ScenarioRunner::run() {
  for (const auto& image : spec_.images) {
    library_.register_image(image);
  }
  sim_ = std::make_unique<SimCloud>(loop_, &trace_, library_, spec_.load_model,
                                    spec_.balancer.monitor_interval);
  for (const auto& provider : spec_.providers) {
    sim_->add_provider(provider);
  }
  start_manager(false);
  schedule_events();
  schedule_tick(spec_.balancer.monitor_interval);

  loop_.run_until(spec_.duration);

  RunResult result;
  if (manager_up_) {
    for (const auto& [id, session] : broker_->sessions()) {
      if (session.state == SessionState::Closed) continue;
      result.final_assignment[id] = session.instance_id;
      result.final_epochs[id] = session.epoch;
    }
  } else {
    auto recovery = SessionJournal::replay(journal_.bytes());
    for (const auto& [id, session] : recovery.sessions) {
      if (session.state == SessionState::Closed) continue;
      result.final_assignment[id] = session.instance_id;
      result.final_epochs[id] = session.epoch;
    }
  }
  result.journal_bytes = journal_.bytes();

  // End-of-scenario teardown: no instance outlives the run.
  for (const auto& record : sim_->list_instances(std::nullopt)) {
    sim_->terminate(record.instance_id);
  }

  result.report = build_report();
  result.trace_lines = trace_.lines();
  result.trace_text = trace_.text();
  result.protocol_violations = violations_;
  return result;
}

}  // namespace

std::string MetricsReport::to_text() const {
  std::ostringstream out;
  out << "evop-report v1\n";
  out << "scenario " << scenario << '\n';
  out << "seed " << seed << '\n';
  out << "duration " << duration << '\n';
  out << "sessions-total " << sessions_total << '\n';
  for (const auto& [provider, n] : sessions_first_placement) {
    out << "first-placement " << provider << ' ' << n << '\n';
  }
  for (const auto& [reason, n] : migrations_by_reason) {
    out << "migrations " << reason << ' ' << n << '\n';
  }
  for (const auto& [provider, n] : launched_by_provider) {
    out << "launched " << provider << ' ' << n << '\n';
  }
  for (const auto& [provider, n] : terminated_by_provider) {
    out << "terminated " << provider << ' ' << n << '\n';
  }
  out << "cost " << format_number(total_cost) << '\n';
  out << "saturation-events " << saturation_events << '\n';
  for (const auto& [rule, n] : verdicts_by_rule) {
    out << "verdicts " << rule << ' ' << n << '\n';
  }
  out << "max-concurrent-public " << max_concurrent_public << '\n';
  out << "placement-failures " << placement_failures << '\n';
  out << "trace-hash " << trace_hash << '\n';
  return out.str();
}

RunResult run_scenario(const ScenarioSpec& spec, const RunOptions& options) {
  ScenarioRunner runner(spec, options);
  return runner.run();
}

}  // namespace evop
