#include "evop/broker.hpp"

#include <cstdio>

namespace evop {

ResourceBroker::ResourceBroker(EventLoop& loop, TraceSink* trace,
                               const ModelLibrary& library, CloudFabric& fabric,
                               SessionJournal& journal)
    : loop_(loop),
      trace_(trace),
      library_(library),
      fabric_(fabric),
      journal_(journal) {}

std::string ResourceBroker::next_session_id() {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s-%04llu",
                static_cast<unsigned long long>(next_session_seq_++));
  return buf;
}

void ResourceBroker::bind(const std::string& instance_id) {
  if (binding_listener_) binding_listener_(instance_id, true);
}

void ResourceBroker::unbind(const std::string& instance_id) {
  if (binding_listener_) binding_listener_(instance_id, false);
}

SessionUpdate ResourceBroker::handle_hello(const std::string& model_id,
                                           ClientChannel* channel) {
  const auto& image = library_.resolve(model_id);  // UnknownModel check
  (void)image;
  if (!placement_) {
    raise(ErrorCode::PlacementFailed, "no placement service attached");
  }
  auto instance_id = placement_->place(model_id);
  auto record = fabric_.find_instance(instance_id);
  if (!record) {
    raise(ErrorCode::PlacementFailed,
          "placement returned unknown instance '" + instance_id + "'");
  }

  Session session;
  session.session_id = next_session_id();
  session.model_id = model_id;
  session.instance_id = instance_id;
  session.epoch = 1;
  session.state = SessionState::Active;
  session.created_at = loop_.now();
  session.last_activity = loop_.now();

  // Durable before visible: the cache holds the assignment before the
  // client hears about it.
  journal_.append_session(session);
  sessions_[session.session_id] = session;
  bind(instance_id);
  if (channel) channels_[session.session_id] = channel;

  SessionUpdate update;
  update.session_id = session.session_id;
  update.new_address = record->address;
  update.new_instance_id = instance_id;
  update.epoch = 1;
  update.reason = UpdateReason::Initial;

  if (trace_) {
    trace_->emit(loop_.now(), "assign", session.session_id,
                 "model=" + model_id + " instance=" + instance_id + " epoch=1");
  }
  if (channel) {
    Frame frame;
    frame.type = Frame::Type::Assign;
    frame.session_id = session.session_id;
    frame.address = record->address;
    frame.epoch = 1;
    channel->send(frame);
  }
  return update;
}

void ResourceBroker::handle_bye(const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    raise(ErrorCode::UnknownSession, "no session '" + session_id + "'");
  }
  auto& session = it->second;
  if (session.state == SessionState::Closed) {
    raise(ErrorCode::AlreadyClosed, "session '" + session_id + "' is closed");
  }
  session.state = SessionState::Closed;
  session.last_activity = loop_.now();
  journal_.append_session(session);
  unbind(session.instance_id);
  channels_.erase(session_id);
  if (trace_) {
    trace_->emit(loop_.now(), "closed", session_id,
                 "instance=" + session.instance_id);
  }
  if (placement_) {
    placement_->on_session_end(session_id, session.instance_id);
  }
}

void ResourceBroker::handle_ping(const std::string& session_id,
                                 ClientChannel* channel) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end() || it->second.state == SessionState::Closed) {
    if (channel) {
      Frame frame;
      frame.type = Frame::Type::Error;
      frame.code = std::string(to_string(ErrorCode::UnknownSession));
      frame.detail = session_id;
      channel->send(frame);
    }
    return;
  }
  auto& session = it->second;
  if (channel) channels_[session_id] = channel;
  auto record = fabric_.find_instance(session.instance_id);
  if (channel && record) {
    Frame frame;
    frame.type = Frame::Type::Assign;
    frame.session_id = session_id;
    frame.address = record->address;
    frame.epoch = session.epoch;
    channel->send(frame);
  }
}

SessionUpdate ResourceBroker::push_update(const std::string& session_id,
                                          const std::string& new_instance_id,
                                          UpdateReason reason) {
  auto& session = session_or_throw(session_id);
  auto record = fabric_.find_instance(new_instance_id);
  if (!record || record->state != InstanceState::Running) {
    raise(ErrorCode::TargetNotRunning,
          "instance '" + new_instance_id + "' is not running");
  }

  auto old_instance = session.instance_id;
  session.epoch += 1;
  session.state = SessionState::Migrating;
  session.instance_id = new_instance_id;
  session.last_activity = loop_.now();
  journal_.append_session(session);

  unbind(old_instance);
  bind(new_instance_id);

  SessionUpdate update;
  update.session_id = session_id;
  update.new_address = record->address;
  update.new_instance_id = new_instance_id;
  update.epoch = session.epoch;
  update.reason = reason;

  if (trace_) {
    trace_->emit(loop_.now(), "update", session_id,
                 "instance=" + new_instance_id +
                     " epoch=" + std::to_string(session.epoch) +
                     " reason=" + std::string(to_string(reason)));
  }
  auto channel_it = channels_.find(session_id);
  if (channel_it != channels_.end()) {
    Frame frame;
    frame.type = Frame::Type::Update;
    frame.session_id = session_id;
    frame.address = record->address;
    frame.epoch = session.epoch;
    frame.reason = reason;
    channel_it->second->send(frame);
  }
  session.state = SessionState::Active;
  return update;
}

ResourceBroker::RecoveryReport ResourceBroker::recover() {
  auto recovery = SessionJournal::replay(journal_.bytes());
  sessions_.clear();
  channels_.clear();
  // No bind() here: the client<->instance attachments physically survived
  // the broker outage, so the simulation's counters are already correct.
  for (auto& [id, session] : recovery.sessions) {
    if (session.state == SessionState::Closed) continue;
    session.state = SessionState::Active;  // migrations complete on replay
    sessions_[id] = session;
  }
  next_session_seq_ = recovery.next_session_seq;

  RecoveryReport report;
  report.sessions_recovered = sessions_.size();
  report.truncated = recovery.truncated;
  report.truncation_note = recovery.truncation_note;
  if (trace_) {
    trace_->emit(loop_.now(), "recover", "broker",
                 "sessions=" + std::to_string(report.sessions_recovered) +
                     " truncated=" + (report.truncated ? "1" : "0"));
  }
  return report;
}

std::vector<std::string> ResourceBroker::sessions_on(
    const std::string& instance_id) const {
  std::vector<std::string> out;
  for (const auto& [id, session] : sessions_) {
    if (session.state != SessionState::Closed &&
        session.instance_id == instance_id) {
      out.push_back(id);
    }
  }
  return out;
}

std::uint64_t ResourceBroker::active_session_count(
    const std::string& instance_id) const {
  std::uint64_t n = 0;
  for (const auto& [id, session] : sessions_) {
    if (session.state != SessionState::Closed &&
        session.instance_id == instance_id) {
      ++n;
    }
  }
  return n;
}

void ResourceBroker::compact_journal() {
  journal_.compact(sessions_, next_session_seq_);
}

Session& ResourceBroker::session_or_throw(const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end() || it->second.state == SessionState::Closed) {
    raise(ErrorCode::UnknownSession,
          "no addressable session '" + session_id + "'");
  }
  return it->second;
}

}  // namespace evop
