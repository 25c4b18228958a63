#include "evop/sim_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace evop {

std::string_view to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::CpuSaturation: return "cpu_saturation";
    case FaultKind::NetworkBlackhole: return "network_blackhole";
    case FaultKind::Crash: return "crash";
  }
  return "unknown";
}

FaultKind fault_kind_from_string(std::string_view text) {
  if (text == "cpu_saturation" || text == "cpu") return FaultKind::CpuSaturation;
  if (text == "network_blackhole" || text == "blackhole") {
    return FaultKind::NetworkBlackhole;
  }
  if (text == "crash") return FaultKind::Crash;
  raise(ErrorCode::ParseError, "unknown fault kind '" + std::string(text) + "'");
}

SimCloud::SimCloud(EventLoop& loop, TraceSink* trace,
                   const ModelLibrary& library, LoadModel load_model,
                   Duration monitor_interval)
    : loop_(loop),
      trace_(trace),
      library_(library),
      load_model_(load_model),
      monitor_interval_(monitor_interval == 0 ? 10 : monitor_interval) {}

void SimCloud::add_provider(ProviderDescriptor descriptor) {
  descriptor.validate();
  if (providers_.count(descriptor.provider_id)) {
    raise(ErrorCode::ValidationError,
          "duplicate provider '" + descriptor.provider_id + "'");
  }
  providers_[descriptor.provider_id] = std::move(descriptor);
}

const ProviderDescriptor& SimCloud::provider(
    const std::string& provider_id) const {
  auto it = providers_.find(provider_id);
  if (it == providers_.end()) {
    raise(ErrorCode::UnknownProvider, "no provider '" + provider_id + "'");
  }
  return it->second;
}

std::vector<ProviderDescriptor> SimCloud::providers() const {
  std::vector<ProviderDescriptor> out;
  for (const auto& [id, desc] : providers_) {
    out.push_back(desc);
  }
  return out;
}

std::uint64_t SimCloud::non_terminated_count(
    const std::string& provider_id) const {
  std::uint64_t n = 0;
  for (const auto& [id, inst] : instances_) {
    if (inst.record.provider_id == provider_id &&
        inst.record.state != InstanceState::Terminated) {
      ++n;
    }
  }
  return n;
}

InstanceRecord SimCloud::launch(const std::string& provider_id,
                                const std::string& image_id) {
  const auto& prov = provider(provider_id);
  if (!library_.has_image(image_id)) {
    raise(ErrorCode::UnknownImage, "no image '" + image_id + "'");
  }
  // Pending instances already count against capacity, so two back-to-back
  // launches cannot both squeeze into the last slot.
  if (prov.capacity && non_terminated_count(provider_id) >= *prov.capacity) {
    raise(ErrorCode::CapacityExceeded,
          "provider '" + provider_id + "' is at capacity " +
              std::to_string(*prov.capacity));
  }

  char idbuf[16];
  std::snprintf(idbuf, sizeof idbuf, "i-%04llu",
                static_cast<unsigned long long>(next_instance_seq_++));
  auto per_provider = ++per_provider_seq_[provider_id];

  Instance inst;
  inst.record.instance_id = idbuf;
  inst.record.provider_id = provider_id;
  inst.record.image_id = image_id;
  inst.record.image_version = library_.image(image_id).version;
  inst.record.address =
      provider_id + "-inst" + std::to_string(per_provider) + ":8080";
  inst.record.state = InstanceState::Pending;
  inst.record.launch_time = loop_.now();
  inst.gateway = std::make_unique<ModelGateway>(inst.record.instance_id,
                                                library_.image(image_id));
  inst.history.emplace_back(loop_.now(), InstanceState::Pending);

  usage_.launched_by_provider[provider_id] += 1;
  if (trace_) {
    trace_->emit(loop_.now(), "launch", inst.record.instance_id,
                 "provider=" + provider_id + " image=" + image_id + "@" +
                     std::to_string(inst.record.image_version) +
                     " address=" + inst.record.address);
  }

  const std::string instance_id = inst.record.instance_id;
  instances_.emplace(instance_id, std::move(inst));
  update_public_concurrency();

  loop_.schedule(loop_.now() + prov.boot_time, "boot", instance_id, "",
                 [this, instance_id] {
                   auto it = instances_.find(instance_id);
                   if (it == instances_.end()) return;
                   auto& inst = it->second;
                   if (inst.record.state != InstanceState::Pending) return;
                   inst.record.state = InstanceState::Running;
                   inst.gateway->set_state(InstanceState::Running);
                   inst.history.emplace_back(loop_.now(), InstanceState::Running);
                   if (inst.queued_requests > 0) {
                     inst.requests_by_interval[loop_.now() /
                                               monitor_interval_] +=
                         inst.queued_requests;
                     inst.queued_requests = 0;
                   }
                 });

  return instances_.at(instance_id).record;
}

double SimCloud::accrual_for(const Instance& inst, VirtualTime at) const {
  const auto& prov = providers_.at(inst.record.provider_id);
  if (prov.cost_rate == 0.0) return 0.0;
  VirtualTime end = inst.record.terminate_time.value_or(at);
  Duration elapsed = end - inst.record.launch_time;
  // Launching commits to at least one billing period.
  std::uint64_t units = (elapsed + prov.billing_granularity - 1) /
                        prov.billing_granularity;
  if (units == 0) units = 1;
  return static_cast<double>(units) * prov.cost_rate;
}

void SimCloud::finish_termination(Instance& inst, std::string_view reason) {
  inst.record.state = InstanceState::Terminated;
  inst.record.terminate_time = loop_.now();
  inst.gateway->set_state(InstanceState::Terminated);
  inst.history.emplace_back(loop_.now(), InstanceState::Terminated);
  inst.billed = accrual_for(inst, loop_.now());
  usage_.terminated_by_provider[inst.record.provider_id] += 1;
  if (trace_) {
    trace_->emit(loop_.now(), "terminate", inst.record.instance_id,
                 "reason=" + std::string(reason) +
                     " cost=" + format_number(*inst.billed));
  }
}

void SimCloud::terminate(const std::string& instance_id) {
  auto& inst = instance_or_throw(instance_id);
  if (inst.record.state == InstanceState::Terminated) {
    raise(ErrorCode::AlreadyTerminated,
          "instance '" + instance_id + "' is already terminated");
  }
  finish_termination(inst, "request");
}

bool SimCloud::fault_covers_interval(const Instance& inst, FaultKind kind,
                                     VirtualTime begin, VirtualTime end) const {
  for (const auto& fault : faults_) {
    if (fault.instance_id != inst.record.instance_id || fault.kind != kind) {
      continue;
    }
    VirtualTime fault_end =
        fault.duration ? fault.start + *fault.duration
                       : std::numeric_limits<VirtualTime>::max();
    if (fault.start <= begin && fault_end >= end) {
      return true;
    }
  }
  return false;
}

HealthSample SimCloud::compute_sample(const Instance& inst,
                                      VirtualTime boundary) const {
  HealthSample sample;
  sample.at = boundary;
  if (boundary == 0) {
    return sample;  // nothing completed yet
  }
  VirtualTime begin = boundary - monitor_interval_;

  if (fault_covers_interval(inst, FaultKind::CpuSaturation, begin, boundary)) {
    sample.cpu = 1.0;
  } else {
    sample.cpu = std::min(
        1.0, static_cast<double>(inst.session_count) * load_model_.per_session_cpu);
  }

  std::uint64_t requests = 0;
  auto it = inst.requests_by_interval.find(begin / monitor_interval_);
  if (it != inst.requests_by_interval.end()) {
    requests = it->second;
  }
  sample.net_in = requests * load_model_.per_request_bytes_in;
  sample.disk_read = requests * load_model_.disk_bytes_per_request;
  sample.disk_write = 0;
  if (fault_covers_interval(inst, FaultKind::NetworkBlackhole, begin, boundary)) {
    sample.net_out = 0;
  } else {
    sample.net_out = requests * load_model_.per_request_bytes_out;
  }
  return sample;
}

HealthSample SimCloud::poll_metrics(const std::string& instance_id) {
  auto& inst = instance_or_throw(instance_id);
  auto state = inst.record.state;
  if (state != InstanceState::Running && state != InstanceState::Degraded &&
      state != InstanceState::Draining) {
    raise(ErrorCode::NotRunning, "instance '" + instance_id + "' is " +
                                     std::string(to_string(state)));
  }
  VirtualTime boundary = (loop_.now() / monitor_interval_) * monitor_interval_;
  // The first poll in an interval fixes the sample; later polls within the
  // same interval see the identical value.
  if (inst.record.last_sample && inst.record.last_sample->at == boundary) {
    return *inst.record.last_sample;
  }
  auto sample = compute_sample(inst, boundary);
  inst.record.last_sample = sample;
  return sample;
}

std::vector<InstanceRecord> SimCloud::list_instances(
    const std::optional<std::string>& provider_id) {
  if (provider_id) {
    provider(*provider_id);  // UnknownProvider check
  }
  std::vector<InstanceRecord> out;
  for (const auto& [id, inst] : instances_) {
    if (inst.record.state == InstanceState::Terminated) continue;
    if (provider_id && inst.record.provider_id != *provider_id) continue;
    out.push_back(inst.record);
  }
  std::sort(out.begin(), out.end(),
            [](const InstanceRecord& a, const InstanceRecord& b) {
              if (a.launch_time != b.launch_time) {
                return a.launch_time < b.launch_time;
              }
              return a.instance_id < b.instance_id;
            });
  return out;
}

std::optional<InstanceRecord> SimCloud::find_instance(
    const std::string& instance_id) const {
  auto it = instances_.find(instance_id);
  if (it == instances_.end()) return std::nullopt;
  return it->second.record;
}

void SimCloud::mark(const std::string& instance_id, InstanceState state) {
  auto& inst = instance_or_throw(instance_id);
  if (!instance_transition_allowed(inst.record.state, state)) {
    raise(ErrorCode::ValidationError,
          "instance '" + instance_id + "' cannot move " +
              std::string(to_string(inst.record.state)) + " -> " +
              std::string(to_string(state)));
  }
  if (state == InstanceState::Terminated) {
    finish_termination(inst, "mark");
    return;
  }
  inst.record.state = state;
  inst.gateway->set_state(state);
  inst.history.emplace_back(loop_.now(), state);
}

double SimCloud::accrued_cost() const {
  double total = 0.0;
  for (const auto& [id, inst] : instances_) {
    total += inst.billed ? *inst.billed : accrual_for(inst, loop_.now());
  }
  return total;
}

void SimCloud::inject_fault(const FaultInjection& fault) {
  instance_or_throw(fault.instance_id);
  if (trace_) {
    std::string detail = "kind=" + std::string(to_string(fault.kind)) +
                         " start=" + std::to_string(fault.start);
    if (fault.duration) {
      detail += " duration=" + std::to_string(*fault.duration);
    }
    trace_->emit(loop_.now(), "fault", fault.instance_id, detail);
  }
  if (fault.kind == FaultKind::Crash) {
    // Silent: the record flips to terminated with no notification. The
    // balancer finds out when its next poll cycle comes up empty.
    const std::string instance_id = fault.instance_id;
    loop_.schedule(std::max(fault.start, loop_.now()), "crash", instance_id, "",
                   [this, instance_id] {
                     auto it = instances_.find(instance_id);
                     if (it == instances_.end()) return;
                     if (it->second.record.state == InstanceState::Terminated) {
                       return;
                     }
                     finish_termination(it->second, "crash");
                   });
    return;
  }
  faults_.push_back(fault);
}

void SimCloud::assign_session(const std::string& instance_id) {
  auto& inst = instance_or_throw(instance_id);
  inst.session_count += 1;
  inst.gateway->set_session_count(inst.session_count);
}

void SimCloud::release_session(const std::string& instance_id) {
  auto& inst = instance_or_throw(instance_id);
  if (inst.session_count == 0) {
    raise(ErrorCode::ValidationError,
          "session count underflow on '" + instance_id + "'");
  }
  inst.session_count -= 1;
  inst.gateway->set_session_count(inst.session_count);
}

std::uint64_t SimCloud::session_count(const std::string& instance_id) const {
  return instance_or_throw(instance_id).session_count;
}

void SimCloud::deliver_requests(const std::string& instance_id,
                                const std::string& model_id,
                                std::uint64_t count) {
  auto& inst = instance_or_throw(instance_id);
  if (inst.record.state == InstanceState::Terminated) {
    return;  // lost on the wire
  }
  if (inst.record.state == InstanceState::Pending) {
    inst.queued_requests += count;
    return;
  }
  ModelRequest request;
  request.model_id = model_id;
  request.request_id = "burst";
  request.parameters = {{"t", static_cast<double>(loop_.now())}};
  // One representative evaluation; traffic accounting scales by count.
  inst.gateway->run_model(request);
  inst.requests_by_interval[loop_.now() / monitor_interval_] += count;
}

const ModelGateway& SimCloud::gateway(const std::string& instance_id) const {
  return *instance_or_throw(instance_id).gateway;
}

const InstanceRecord& SimCloud::record(const std::string& instance_id) const {
  return instance_or_throw(instance_id).record;
}

const std::vector<std::pair<VirtualTime, InstanceState>>&
SimCloud::state_history(const std::string& instance_id) const {
  return instance_or_throw(instance_id).history;
}

std::vector<InstanceRecord> SimCloud::all_records() const {
  std::vector<InstanceRecord> out;
  for (const auto& [id, inst] : instances_) {
    out.push_back(inst.record);
  }
  return out;
}

void SimCloud::update_public_concurrency() {
  std::uint64_t live = 0;
  for (const auto& [id, inst] : instances_) {
    if (inst.record.state == InstanceState::Terminated) continue;
    if (providers_.at(inst.record.provider_id).kind == ProviderKind::Public) {
      ++live;
    }
  }
  usage_.max_concurrent_public = std::max(usage_.max_concurrent_public, live);
}

SimCloud::Instance& SimCloud::instance_or_throw(const std::string& instance_id) {
  auto it = instances_.find(instance_id);
  if (it == instances_.end()) {
    raise(ErrorCode::UnknownInstance, "no instance '" + instance_id + "'");
  }
  return it->second;
}

const SimCloud::Instance& SimCloud::instance_or_throw(
    const std::string& instance_id) const {
  auto it = instances_.find(instance_id);
  if (it == instances_.end()) {
    raise(ErrorCode::UnknownInstance, "no instance '" + instance_id + "'");
  }
  return it->second;
}

}  // namespace evop
