#include "evop/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace evop {

std::string_view to_string(ScenarioEvent::Kind kind) {
  switch (kind) {
    case ScenarioEvent::Kind::Arrival: return "arrive";
    case ScenarioEvent::Kind::Departure: return "depart";
    case ScenarioEvent::Kind::Burst: return "burst";
    case ScenarioEvent::Kind::Fault: return "fault";
    case ScenarioEvent::Kind::BrokerCrash: return "broker-crash";
  }
  return "unknown";
}

std::vector<ProviderDescriptor> default_providers() {
  ProviderDescriptor private_cloud;
  private_cloud.provider_id = "private-cloud";
  private_cloud.kind = ProviderKind::Private;
  private_cloud.capacity = 4;
  private_cloud.cost_rate = 0.0;
  private_cloud.billing_granularity = 3600;
  private_cloud.boot_time = 30;

  ProviderDescriptor public_cloud;
  public_cloud.provider_id = "public-cloud";
  public_cloud.kind = ProviderKind::Public;
  public_cloud.cost_rate = 1.0;
  public_cloud.billing_granularity = 3600;
  public_cloud.boot_time = 30;

  return {private_cloud, public_cloud};
}

namespace {

ProviderDescriptor parse_provider_line(const std::vector<std::string>& tokens) {
  if (tokens.size() < 2) {
    raise(ErrorCode::ParseError, "expected 'provider <id> key=value...'");
  }
  ProviderDescriptor desc;
  desc.provider_id = tokens[1];
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (tokens[i].empty()) continue;
    std::string key, value;
    if (!split_kv(tokens[i], key, value)) {
      raise(ErrorCode::ParseError, "bad provider attribute '" + tokens[i] + "'");
    }
    if (key == "kind") {
      desc.kind = provider_kind_from_string(value);
    } else if (key == "capacity") {
      desc.capacity = parse_u64(value, "provider capacity");
    } else if (key == "cost-rate") {
      desc.cost_rate = parse_fraction(value, "provider cost-rate");
    } else if (key == "granularity") {
      desc.billing_granularity = parse_u64(value, "provider granularity");
    } else if (key == "boot-time") {
      desc.boot_time = parse_u64(value, "provider boot-time");
    } else {
      raise(ErrorCode::ParseError, "unknown provider attribute '" + key + "'");
    }
  }
  return desc;
}

void parse_balancer_line(const std::vector<std::string>& tokens,
                         BalancerConfig& config) {
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    if (tokens[i].empty()) continue;
    std::string key, value;
    if (!split_kv(tokens[i], key, value)) {
      raise(ErrorCode::ParseError, "bad balancer attribute '" + tokens[i] + "'");
    }
    if (key == "monitor-interval") {
      config.monitor_interval = parse_u64(value, "monitor-interval");
    } else if (key == "cpu-high") {
      config.cpu_high_threshold = parse_fraction(value, "cpu-high");
    } else if (key == "window") {
      config.sustained_window = parse_u64(value, "window");
    } else if (key == "underuse") {
      config.underuse_threshold = parse_fraction(value, "underuse");
    } else if (key == "cooldown") {
      config.migration_cooldown = parse_u64(value, "cooldown");
    } else if (key == "policy") {
      config.placement_policy = placement_policy_from_string(value);
    } else {
      raise(ErrorCode::ParseError, "unknown balancer attribute '" + key + "'");
    }
  }
}

void parse_load_model_line(const std::vector<std::string>& tokens,
                           LoadModel& model) {
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    if (tokens[i].empty()) continue;
    std::string key, value;
    if (!split_kv(tokens[i], key, value)) {
      raise(ErrorCode::ParseError, "bad load-model attribute '" + tokens[i] + "'");
    }
    if (key == "per-session-cpu") {
      model.per_session_cpu = parse_fraction(value, "per-session-cpu");
    } else if (key == "req-bytes-in") {
      model.per_request_bytes_in = parse_u64(value, "req-bytes-in");
    } else if (key == "req-bytes-out") {
      model.per_request_bytes_out = parse_u64(value, "req-bytes-out");
    } else if (key == "disk-bytes") {
      model.disk_bytes_per_request = parse_u64(value, "disk-bytes");
    } else {
      raise(ErrorCode::ParseError, "unknown load-model attribute '" + key + "'");
    }
  }
}

ScenarioEvent parse_event_line(const std::vector<std::string>& tokens) {
  // at <t> <verb> ...
  if (tokens.size() < 3) {
    raise(ErrorCode::ParseError, "expected 'at <t> <verb> ...'");
  }
  ScenarioEvent event;
  event.at = parse_u64(tokens[1], "event time");
  const auto& verb = tokens[2];
  if (verb == "arrive") {
    if (tokens.size() != 5) {
      raise(ErrorCode::ParseError, "expected 'at <t> arrive <ref> <model>'");
    }
    event.kind = ScenarioEvent::Kind::Arrival;
    event.ref = tokens[3];
    event.model_id = tokens[4];
  } else if (verb == "depart") {
    if (tokens.size() != 4) {
      raise(ErrorCode::ParseError, "expected 'at <t> depart <ref>'");
    }
    event.kind = ScenarioEvent::Kind::Departure;
    event.ref = tokens[3];
  } else if (verb == "burst") {
    if (tokens.size() != 5) {
      raise(ErrorCode::ParseError, "expected 'at <t> burst <ref> <count>'");
    }
    event.kind = ScenarioEvent::Kind::Burst;
    event.ref = tokens[3];
    event.count = parse_u64(tokens[4], "burst count");
  } else if (verb == "fault") {
    if (tokens.size() < 5) {
      raise(ErrorCode::ParseError,
            "expected 'at <t> fault <kind> <instance> [duration=N]'");
    }
    event.kind = ScenarioEvent::Kind::Fault;
    event.fault.kind = fault_kind_from_string(tokens[3]);
    event.fault.instance_id = tokens[4];
    event.fault.start = event.at;
    for (std::size_t i = 5; i < tokens.size(); ++i) {
      std::string key, value;
      if (split_kv(tokens[i], key, value) && key == "duration") {
        event.fault.duration = parse_u64(value, "fault duration");
      } else {
        raise(ErrorCode::ParseError, "bad fault attribute '" + tokens[i] + "'");
      }
    }
  } else if (verb == "broker-crash") {
    event.kind = ScenarioEvent::Kind::BrokerCrash;
    for (std::size_t i = 3; i < tokens.size(); ++i) {
      std::string key, value;
      if (split_kv(tokens[i], key, value) && key == "restart") {
        event.restart_delay = parse_u64(value, "restart delay");
      } else {
        raise(ErrorCode::ParseError,
              "bad broker-crash attribute '" + tokens[i] + "'");
      }
    }
  } else {
    raise(ErrorCode::ParseError, "unknown event verb '" + verb + "'");
  }
  return event;
}

}  // namespace

std::vector<std::string> validate_scenario(const ScenarioSpec& spec) {
  std::vector<std::string> errors;
  auto note = [&errors](const std::string& message) {
    errors.push_back(message);
  };

  for (const auto& provider : spec.providers) {
    try {
      provider.validate();
    } catch (const Error& e) {
      note(e.what());
    }
  }
  std::size_t zero_rate = 0;
  std::set<std::string> provider_ids;
  for (const auto& provider : spec.providers) {
    if (provider.cost_rate == 0.0) ++zero_rate;
    if (!provider_ids.insert(provider.provider_id).second) {
      note("duplicate provider id '" + provider.provider_id + "'");
    }
  }
  if (zero_rate > 1) {
    note("at most one provider may have a zero cost rate");
  }

  ModelLibrary library;
  for (const auto& image : spec.images) {
    try {
      image.validate();
      library.register_image(image);
    } catch (const Error& e) {
      note(e.what());
    }
  }

  try {
    spec.balancer.validate();
  } catch (const Error& e) {
    note(e.what());
  }

  std::map<std::string, VirtualTime> arrivals;
  std::set<std::string> departed;
  for (const auto& event : spec.events) {
    if (event.at > spec.duration) {
      note("event at t=" + std::to_string(event.at) + " exceeds duration " +
           std::to_string(spec.duration));
    }
    switch (event.kind) {
      case ScenarioEvent::Kind::Arrival: {
        if (arrivals.count(event.ref)) {
          note("duplicate arrival ref '" + event.ref + "'");
        }
        arrivals[event.ref] = event.at;
        bool served = false;
        for (const auto& image : spec.images) {
          if (image.model_ids.count(event.model_id)) served = true;
        }
        if (!served) {
          note("arrival '" + event.ref + "' references model '" +
               event.model_id + "' served by no image");
        }
        break;
      }
      case ScenarioEvent::Kind::Departure: {
        auto it = arrivals.find(event.ref);
        if (it == arrivals.end()) {
          note("departure references unknown arrival '" + event.ref + "'");
        } else if (event.at < it->second) {
          note("departure of '" + event.ref + "' precedes its arrival");
        }
        if (!departed.insert(event.ref).second) {
          note("duplicate departure for '" + event.ref + "'");
        }
        break;
      }
      case ScenarioEvent::Kind::Burst: {
        auto it = arrivals.find(event.ref);
        if (it == arrivals.end()) {
          note("burst references unknown arrival '" + event.ref + "'");
        } else if (event.at < it->second) {
          note("burst for '" + event.ref + "' precedes its arrival");
        }
        break;
      }
      case ScenarioEvent::Kind::Fault:
        if (event.fault.instance_id.empty()) {
          note("fault at t=" + std::to_string(event.at) + " names no instance");
        }
        break;
      case ScenarioEvent::Kind::BrokerCrash:
        break;
    }
  }
  return errors;
}

ScenarioSpec parse_scenario_text(const std::string& text,
                                 const std::string& name) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header) || trim(header) != kScenarioHeader) {
    raise(ErrorCode::ParseError,
          "scenario '" + name + "' has bad header '" + header + "'");
  }

  ScenarioSpec spec;
  spec.name = name;
  std::vector<std::string> errors;
  std::string line;
  std::size_t line_no = 1;
  bool balancer_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto trimmed = std::string(trim(line));
    if (trimmed.empty() || trimmed.front() == '#') continue;
    auto tokens = split(trimmed, ' ');
    tokens.erase(std::remove(tokens.begin(), tokens.end(), std::string()),
                 tokens.end());
    if (tokens.empty()) continue;
    try {
      const auto& head = tokens[0];
      if (head == "name" && tokens.size() == 2) {
        spec.name = tokens[1];
      } else if (head == "seed" && tokens.size() == 2) {
        spec.seed = parse_u64(tokens[1], "seed");
      } else if (head == "duration" && tokens.size() == 2) {
        spec.duration = parse_u64(tokens[1], "duration");
      } else if (head == "arrival-jitter" && tokens.size() == 2) {
        spec.arrival_jitter = parse_u64(tokens[1], "arrival-jitter");
      } else if (head == "retry-jitter" && tokens.size() == 2) {
        spec.retry_jitter = parse_u64(tokens[1], "retry-jitter");
      } else if (head == "provider") {
        spec.providers.push_back(parse_provider_line(tokens));
      } else if (head == "image") {
        spec.images.push_back(ModelLibrary::parse_image_line(trimmed));
      } else if (head == "balancer") {
        parse_balancer_line(tokens, spec.balancer);
        balancer_seen = true;
      } else if (head == "load-model") {
        parse_load_model_line(tokens, spec.load_model);
      } else if (head == "at") {
        spec.events.push_back(parse_event_line(tokens));
      } else {
        raise(ErrorCode::ParseError, "unknown directive '" + head + "'");
      }
    } catch (const Error& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  (void)balancer_seen;

  if (spec.providers.empty()) {
    spec.providers = default_providers();
  }

  auto validation = validate_scenario(spec);
  errors.insert(errors.end(), validation.begin(), validation.end());
  if (!errors.empty()) {
    std::string joined;
    for (const auto& e : errors) {
      joined += "\n  - " + e;
    }
    raise(ErrorCode::ValidationError,
          "scenario '" + name + "' has " + std::to_string(errors.size()) +
              " problem(s):" + joined);
  }
  return spec;
}

ScenarioSpec parse_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::ParseError, "cannot read scenario file " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), std::filesystem::path(path).stem().string());
}

std::string format_scenario(const ScenarioSpec& spec) {
  std::ostringstream out;
  out << kScenarioHeader << '\n';
  out << "name " << spec.name << '\n';
  out << "seed " << spec.seed << '\n';
  out << "duration " << spec.duration << '\n';
  if (spec.arrival_jitter) out << "arrival-jitter " << spec.arrival_jitter << '\n';
  if (spec.retry_jitter) out << "retry-jitter " << spec.retry_jitter << '\n';
  for (const auto& p : spec.providers) {
    out << "provider " << p.provider_id << " kind=" << to_string(p.kind);
    if (p.capacity) out << " capacity=" << *p.capacity;
    out << " cost-rate=" << format_number(p.cost_rate)
        << " granularity=" << p.billing_granularity
        << " boot-time=" << p.boot_time << '\n';
  }
  for (const auto& image : spec.images) {
    out << ModelLibrary::format_image_line(image) << '\n';
  }
  const auto& b = spec.balancer;
  out << "balancer monitor-interval=" << b.monitor_interval
      << " cpu-high=" << format_number(b.cpu_high_threshold)
      << " window=" << b.sustained_window
      << " underuse=" << format_number(b.underuse_threshold)
      << " cooldown=" << b.migration_cooldown
      << " policy=" << to_string(b.placement_policy) << '\n';
  const auto& m = spec.load_model;
  out << "load-model per-session-cpu=" << format_number(m.per_session_cpu)
      << " req-bytes-in=" << m.per_request_bytes_in
      << " req-bytes-out=" << m.per_request_bytes_out
      << " disk-bytes=" << m.disk_bytes_per_request << '\n';
  for (const auto& event : spec.events) {
    out << "at " << event.at << ' ' << to_string(event.kind);
    switch (event.kind) {
      case ScenarioEvent::Kind::Arrival:
        out << ' ' << event.ref << ' ' << event.model_id;
        break;
      case ScenarioEvent::Kind::Departure:
        out << ' ' << event.ref;
        break;
      case ScenarioEvent::Kind::Burst:
        out << ' ' << event.ref << ' ' << event.count;
        break;
      case ScenarioEvent::Kind::Fault:
        out << ' ' << to_string(event.fault.kind) << ' '
            << event.fault.instance_id;
        if (event.fault.duration) out << " duration=" << *event.fault.duration;
        break;
      case ScenarioEvent::Kind::BrokerCrash:
        out << " restart=" << event.restart_delay;
        break;
    }
    out << '\n';
  }
  return out.str();
}

TraceDiff diff_trace_text(const std::string& a, const std::string& b) {
  auto lines_a = split(a, '\n');
  auto lines_b = split(b, '\n');
  // split() yields one empty trailing element for newline-terminated text.
  if (!lines_a.empty() && lines_a.back().empty()) lines_a.pop_back();
  if (!lines_b.empty() && lines_b.back().empty()) lines_b.pop_back();

  TraceDiff diff;
  auto n = std::max(lines_a.size(), lines_b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string* left = i < lines_a.size() ? &lines_a[i] : nullptr;
    const std::string* right = i < lines_b.size() ? &lines_b[i] : nullptr;
    if (left && right && *left == *right) continue;
    diff.equal = false;
    diff.line = i + 1;
    if (left) diff.left = *left;
    if (right) diff.right = *right;
    return diff;
  }
  return diff;
}

TraceDiff diff_traces(const std::string& path_a, const std::string& path_b) {
  auto read = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      raise(ErrorCode::UnreadableTrace, "cannot read trace file " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  return diff_trace_text(read(path_a), read(path_b));
}

}  // namespace evop
