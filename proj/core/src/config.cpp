#include "evop/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "evop/scenario.hpp"

namespace evop {

MainConfig parse_main_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::ParseError, "cannot read config file " + path);
  }
  std::string header;
  std::getline(in, header);
  if (trim(header) != kConfigHeader) {
    raise(ErrorCode::ParseError,
          "config file " + path + " has bad header '" + header + "'");
  }

  // The config shares the scenario grammar for provider/balancer lines.
  std::ostringstream text;
  text << kScenarioHeader << '\n';
  MainConfig config;
  std::string line;
  while (std::getline(in, line)) {
    auto trimmed = std::string(trim(line));
    if (trimmed.empty() || trimmed.front() == '#') continue;
    if (trimmed.rfind("registry ", 0) == 0) {
      config.registry_path = std::string(trim(trimmed.substr(9)));
      continue;
    }
    text << trimmed << '\n';
  }
  auto spec = parse_scenario_text(text.str(), path);
  config.providers = spec.providers;
  config.balancer = spec.balancer;
  return config;
}

MainConfig main_config_from_env() {
  const char* path = std::getenv("EVOP_CONFIG");
  if (path == nullptr || *path == '\0') {
    MainConfig config;
    config.providers = default_providers();
    return config;
  }
  return parse_main_config(path);
}

}  // namespace evop
