#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "evop/common.hpp"
#include "evop/event_loop.hpp"
#include "evop/messages.hpp"
#include "evop/model_library.hpp"
#include "evop/provider.hpp"
#include "evop/session.hpp"
#include "evop/session_journal.hpp"
#include "evop/trace.hpp"

namespace evop {

/// What the broker needs from the load balancer.
class PlacementService {
 public:
  virtual ~PlacementService() = default;

  /// Picks (or launches) a serving instance for a new session of `model_id`.
  virtual std::string place(const std::string& model_id) = 0;

  virtual void on_session_end(const std::string& session_id,
                              const std::string& instance_id) = 0;
};

/// The Resource Broker: accepts client connections on a duplex control
/// channel, binds each session to an instance, senses session end, and
/// pushes session updates. All session mutations hit the persistent cache
/// before any message leaves, so a crashed broker restarts from the journal
/// with nothing lost.
class ResourceBroker {
 public:
  ResourceBroker(EventLoop& loop, TraceSink* trace, const ModelLibrary& library,
                 CloudFabric& fabric, SessionJournal& journal);

  void set_placement(PlacementService* placement) { placement_ = placement; }

  /// Invoked when a session binds to / leaves an instance; the simulation
  /// mirrors these into per-instance session counts.
  using BindingListener = std::function<void(const std::string& instance_id, bool bound)>;
  void set_binding_listener(BindingListener listener) {
    binding_listener_ = std::move(listener);
  }

  SessionUpdate handle_hello(const std::string& model_id, ClientChannel* channel);
  void handle_bye(const std::string& session_id);

  /// Re-establishes a (possibly stale) channel: replies with an ASSIGN
  /// carrying the session's current address and epoch.
  void handle_ping(const std::string& session_id, ClientChannel* channel);

  /// Moves a session to a new (running) instance. Persists the new epoch
  /// before the UPDATE frame is emitted; invoked by the load balancer.
  SessionUpdate push_update(const std::string& session_id,
                            const std::string& new_instance_id,
                            UpdateReason reason);

  struct RecoveryReport {
    std::size_t sessions_recovered = 0;
    bool truncated = false;
    std::string truncation_note;
  };

  /// Rebuilds the session table from the journal: every non-closed session
  /// comes back with its id, instance and epoch. Channels reattach lazily
  /// via PING.
  RecoveryReport recover();

  const std::map<std::string, Session>& sessions() const noexcept {
    return sessions_;
  }

  /// Ids of active sessions currently bound to `instance_id`, sorted.
  std::vector<std::string> sessions_on(const std::string& instance_id) const;

  std::uint64_t active_session_count(const std::string& instance_id) const;

  /// Drops closed sessions from the journal by rewriting it as a snapshot.
  void compact_journal();

 private:
  std::string next_session_id();
  Session& session_or_throw(const std::string& session_id);
  void bind(const std::string& instance_id);
  void unbind(const std::string& instance_id);

  EventLoop& loop_;
  TraceSink* trace_;
  const ModelLibrary& library_;
  CloudFabric& fabric_;
  SessionJournal& journal_;
  PlacementService* placement_ = nullptr;
  BindingListener binding_listener_;

  std::map<std::string, Session> sessions_;
  std::map<std::string, ClientChannel*> channels_;
  std::uint64_t next_session_seq_ = 1;
};

}  // namespace evop
