// sparseworld command-line entry point.
//
//   sparseworld <gen|train|rollout|plan|eval|bench> [--config FILE] [--KEY VALUE ...]
//
// Exit codes: 0 success, 1 validation failure, 2 I/O failure.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparseworld/errors.hpp"
#include "sparseworld/harness.hpp"

namespace sw = sparseworld;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

// Boolean pair flag name -> config key.
const std::vector<std::pair<std::string, std::string>> kAblations{
    {"pe", "use_pe"},   {"pp", "use_pp"},   {"fif", "use_fif"},
    {"scl", "use_scl"}, {"ats", "use_ats"}, {"refine-agents", "refine_agents"},
    {"refine-maps", "refine_maps"}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse instance world model: dataset generation, training, evaluation and benchmarks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_file;
  app.add_option("--config", config_file, "key = value configuration file");

  // Every config key is a flag of the same name; values are parsed by the library.
  std::map<std::string, std::string> overrides;
  for (const auto& key : sw::config_keys()) {
    app.add_option_function<std::string>(
        "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, "config key " + key);
  }
  std::map<std::string, bool> toggles;
  for (const auto& [flag, key] : kAblations) {
    app.add_flag_callback("--use-" + flag, [&toggles, key = key] { toggles[key] = true; }, "enable " + key);
    app.add_flag_callback("--no-" + flag, [&toggles, key = key] { toggles[key] = false; }, "disable " + key);
  }
  bool quiet = false;
  app.add_flag("--quiet", quiet, "suppress progress output");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen", "generate the training dataset"},
      {"train", "train the world model and motion network"},
      {"rollout", "forecasting evaluation"},
      {"plan", "motion and open-loop planning evaluation"},
      {"eval", "rollout and plan evaluations in one report"},
      {"bench", "latency and memory of the world-model decoder"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    sw::RunConfig config = config_file ? sw::load_run_config(*config_file) : sw::RunConfig{};
    for (const auto& [key, value] : overrides) sw::set_config_value(config, key, value);
    for (const auto& [key, value] : toggles) sw::set_config_value(config, key, value ? "true" : "false");

    const std::string command = app.get_subcommands().front()->get_name();
    auto log = [quiet](const std::string& line) {
      if (!quiet) std::cerr << line << '\n';
    };
    if (command == "gen") {
      sw::cmd_gen(config);
    } else if (command == "train") {
      sw::cmd_train(config, log);
    } else if (command == "rollout") {
      sw::cmd_rollout(config);
    } else if (command == "plan") {
      sw::cmd_plan(config);
    } else if (command == "eval") {
      sw::cmd_eval(config);
    } else {
      sw::cmd_bench(config);
    }
    log("report written to " + config.report.string());
    return kExitOk;
  } catch (const sw::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const sw::MissingCheckpoint& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}
