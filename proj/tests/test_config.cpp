#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "evop/config.hpp"

using namespace evop;

TEST_CASE("the main config file carries registry, providers and balancer") {
  auto path = (std::filesystem::temp_directory_path() / "evop-config").string();
  {
    std::ofstream out(path);
    out << "evop-config v1\n"
        << "registry /tmp/models.evop-library\n"
        << "provider ecc kind=private capacity=8 cost-rate=0\n"
        << "provider aws kind=public cost-rate=2.0\n"
        << "balancer monitor-interval=15 window=3\n";
  }
  auto config = parse_main_config(path);
  CHECK(config.registry_path == "/tmp/models.evop-library");
  REQUIRE(config.providers.size() == 2);
  CHECK(config.providers[0].provider_id == "ecc");
  CHECK(config.providers[0].capacity == std::uint64_t{8});
  CHECK(config.balancer.monitor_interval == 15);
  CHECK(config.balancer.sustained_window == 3);

  setenv("EVOP_CONFIG", path.c_str(), 1);
  auto from_env = main_config_from_env();
  CHECK(from_env.registry_path == config.registry_path);
  unsetenv("EVOP_CONFIG");

  auto defaults = main_config_from_env();
  CHECK(defaults.registry_path == "models.evop-library");
  CHECK(defaults.providers.size() == 2);
  std::filesystem::remove(path);
}

TEST_CASE("a config with a wrong header is rejected") {
  auto path = (std::filesystem::temp_directory_path() / "evop-bad-config").string();
  {
    std::ofstream out(path);
    out << "something else\n";
  }
  CHECK_THROWS_AS(parse_main_config(path), Error);
  std::filesystem::remove(path);
}
