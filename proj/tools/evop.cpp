// evop - scenario-driven infrastructure manager CLI.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "evop/common.hpp"
#include "evop/config.hpp"
#include "evop/model_library.hpp"
#include "evop/runner.hpp"
#include "evop/scenario.hpp"
#include "evop/session_journal.hpp"

namespace {

int exit_code_for(const evop::Error& e) {
  switch (e.code()) {
    case evop::ErrorCode::ParseError:
    case evop::ErrorCode::ValidationError:
    case evop::ErrorCode::UnreadableTrace:
    case evop::ErrorCode::ModelConflict:
    case evop::ErrorCode::CorruptCache:
      return 1;
    default:
      return 2;
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    evop::raise(evop::ErrorCode::ValidationError, "cannot write " + path);
  }
  out << content;
}

std::string registry_path_or_default(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  return evop::main_config_from_env().registry_path;
}

evop::ModelLibrary load_registry_or_empty(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    return evop::ModelLibrary{};
  }
  return evop::ModelLibrary::load(path);
}

int run_sim(const std::string& scenario_path, std::uint64_t seed,
            bool seed_given, const std::string& trace_path,
            const std::string& report_path) {
  auto spec = evop::parse_scenario(scenario_path);
  evop::RunOptions options;
  if (seed_given) {
    options.seed_override = seed;
  }
  auto result = evop::run_scenario(spec, options);
  if (!trace_path.empty()) {
    write_file(trace_path, result.trace_text);
  }
  auto report_text = result.report.to_text();
  if (!report_path.empty()) {
    write_file(report_path, report_text);
  }
  std::cout << report_text;
  return 0;
}

int run_diff(const std::string& a, const std::string& b) {
  auto diff = evop::diff_traces(a, b);
  if (diff.equal) {
    std::cout << "traces are identical\n";
    return 0;
  }
  std::cout << "traces diverge at line " << diff.line << "\n"
            << "  a: " << diff.left << "\n"
            << "  b: " << diff.right << "\n";
  return 1;
}

int run_library_ls(const std::string& registry_flag) {
  auto path = registry_path_or_default(registry_flag);
  auto library = load_registry_or_empty(path);
  for (const auto& image : library.list_images()) {
    std::cout << evop::ModelLibrary::format_image_line(image) << '\n';
  }
  return 0;
}

int run_library_register(const std::string& file, const std::string& registry_flag) {
  auto path = registry_path_or_default(registry_flag);
  auto library = load_registry_or_empty(path);

  std::ifstream in(file, std::ios::binary);
  if (!in) {
    evop::raise(evop::ErrorCode::ParseError, "cannot read image file " + file);
  }
  std::string line;
  bool any = false;
  while (std::getline(in, line)) {
    auto trimmed = std::string(evop::trim(line));
    if (trimmed.empty() || trimmed.front() == '#') continue;
    if (trimmed == "evop-model-library v1") continue;
    auto desc = evop::ModelLibrary::parse_image_line(trimmed);
    auto [image_id, version] = library.register_image(desc);
    std::cout << "registered " << image_id << " version " << version << '\n';
    any = true;
  }
  if (!any) {
    evop::raise(evop::ErrorCode::ValidationError,
                "no image records in " + file);
  }
  library.save(path);
  return 0;
}

int run_broker_recover(const std::string& cache_path) {
  auto recovery = evop::SessionJournal::replay_file(cache_path);
  std::size_t active = 0;
  for (const auto& [id, session] : recovery.sessions) {
    if (session.state == evop::SessionState::Closed) continue;
    std::cout << "session " << id << " model=" << session.model_id
              << " instance=" << session.instance_id
              << " epoch=" << session.epoch << '\n';
    ++active;
  }
  std::cout << "recovered " << active << " active session(s), "
            << recovery.records << " journal record(s)\n";
  if (recovery.truncated) {
    std::cout << "journal truncated: " << recovery.truncation_note
              << " (valid prefix " << recovery.valid_bytes << " bytes)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EVOp infrastructure manager"};
  app.require_subcommand(1);

  // sim
  auto* sim = app.add_subcommand("sim", "run and compare simulations");
  sim->require_subcommand(1);

  std::string scenario_path, trace_path, report_path;
  std::uint64_t seed = 0;
  auto* sim_run = sim->add_subcommand("run", "run a scenario");
  sim_run->add_option("--scenario", scenario_path, "scenario file")->required();
  auto* seed_opt = sim_run->add_option("--seed", seed, "override the scenario seed");
  sim_run->add_option("--trace", trace_path, "write the event trace here");
  sim_run->add_option("--report", report_path, "write the metrics report here");

  std::string diff_a, diff_b;
  auto* sim_diff = sim->add_subcommand("diff", "compare two trace files");
  sim_diff->add_option("a", diff_a, "first trace")->required();
  sim_diff->add_option("b", diff_b, "second trace")->required();

  // library
  auto* library = app.add_subcommand("library", "inspect or update the model library");
  library->require_subcommand(1);
  std::string registry_flag;
  auto* lib_ls = library->add_subcommand("ls", "list registered images");
  lib_ls->add_option("--registry", registry_flag, "registry file (default from EVOP_CONFIG)");
  std::string image_file;
  auto* lib_register = library->add_subcommand("register", "register image descriptors");
  lib_register->add_option("--file", image_file, "image descriptor file")->required();
  lib_register->add_option("--registry", registry_flag, "registry file (default from EVOP_CONFIG)");

  // broker
  auto* broker = app.add_subcommand("broker", "offline broker utilities");
  broker->require_subcommand(1);
  std::string cache_path;
  auto* broker_recover = broker->add_subcommand("recover", "inspect an Active Sessions cache");
  broker_recover->add_option("--cache", cache_path, "journal file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_run->parsed()) {
      return run_sim(scenario_path, seed, seed_opt->count() > 0, trace_path,
                     report_path);
    }
    if (sim_diff->parsed()) {
      return run_diff(diff_a, diff_b);
    }
    if (lib_ls->parsed()) {
      return run_library_ls(registry_flag);
    }
    if (lib_register->parsed()) {
      return run_library_register(image_file, registry_flag);
    }
    if (broker_recover->parsed()) {
      return run_broker_recover(cache_path);
    }
  } catch (const evop::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
