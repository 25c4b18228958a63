#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evop/balancer.hpp"
#include "evop/provider.hpp"

namespace evop {

/// The deployment-wide configuration: provider catalog, balancer settings,
/// and where the model registry lives. Pointed at by EVOP_CONFIG.
struct MainConfig {
  std::string registry_path = "models.evop-library";
  std::vector<ProviderDescriptor> providers;
  BalancerConfig balancer;
};

static constexpr std::string_view kConfigHeader = "evop-config v1";

MainConfig parse_main_config(const std::string& path);

/// Loads the file named by EVOP_CONFIG, or defaults when unset.
MainConfig main_config_from_env();

}  // namespace evop
