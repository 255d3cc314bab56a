#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "parallel.hpp"
#include "sparseworld/errors.hpp"
#include "sparseworld/harness.hpp"
#include "sparseworld/serialize.hpp"

namespace sparseworld {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ValidationError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ValidationError("config key '" + key + "': expected a boolean, got '" + text + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Key number_key(std::string name, T RunConfig::*member) {
  return {name,
          [name, member](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(name, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

template <typename Owner, typename T>
Key nested_key(std::string name, Owner RunConfig::*owner, T Owner::*member) {
  return {name,
          [name, owner, member](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) {
              (c.*owner).*member = parse_bool(name, v);
            } else {
              (c.*owner).*member = parse_number<T>(name, v);
            }
          },
          [owner, member](const RunConfig& c) {
            if constexpr (std::is_same_v<T, bool>) {
              return std::string((c.*owner).*member ? "true" : "false");
            } else if constexpr (std::is_floating_point_v<T>) {
              return format_double((c.*owner).*member);
            } else {
              return std::to_string((c.*owner).*member);
            }
          }};
}

Key path_key(std::string name, std::filesystem::path RunConfig::*member) {
  return {name, [member](RunConfig& c, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return (c.*member).string(); }};
}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back(path_key("dataset", &RunConfig::dataset));
    k.push_back(path_key("checkpoint", &RunConfig::checkpoint));
    k.push_back(path_key("report", &RunConfig::report));
    k.push_back(number_key("seed", &RunConfig::seed));
    k.push_back(number_key("jobs", &RunConfig::jobs));
    k.push_back(nested_key("history", &RunConfig::rollout, &RolloutConfig::history));
    k.push_back(nested_key("forecast", &RunConfig::rollout, &RolloutConfig::forecast));
    k.push_back(nested_key("window", &RunConfig::rollout, &RolloutConfig::window));
    k.push_back(nested_key("dt", &RunConfig::rollout, &RolloutConfig::dt));
    k.push_back(nested_key("theta", &RunConfig::safety, &SafetyConfig::theta));
    k.push_back(nested_key("max_resolve_iters", &RunConfig::safety, &SafetyConfig::max_resolve_iters));
    k.push_back(nested_key("adjustment_cap", &RunConfig::safety, &SafetyConfig::adjustment_cap));
    k.push_back(nested_key("use_pe", &RunConfig::flags, &AblationFlags::use_pe));
    k.push_back(nested_key("use_pp", &RunConfig::flags, &AblationFlags::use_pp));
    k.push_back(nested_key("use_fif", &RunConfig::flags, &AblationFlags::use_fif));
    k.push_back(nested_key("use_scl", &RunConfig::flags, &AblationFlags::use_scl));
    k.push_back(nested_key("use_ats", &RunConfig::flags, &AblationFlags::use_ats));
    k.push_back(nested_key("refine_agents", &RunConfig::flags, &AblationFlags::refine_agents));
    k.push_back(nested_key("refine_maps", &RunConfig::flags, &AblationFlags::refine_maps));
    k.push_back(number_key("n_train", &RunConfig::n_train));
    k.push_back(number_key("n_eval", &RunConfig::n_eval));
    k.push_back(number_key("eval_seed", &RunConfig::eval_seed));
    k.push_back(number_key("agents", &RunConfig::agents));
    k.push_back(number_key("map_elements", &RunConfig::map_elements));
    k.push_back(number_key("duration", &RunConfig::duration));
    k.push_back(number_key("n_crossing", &RunConfig::n_crossing));
    k.push_back(number_key("train_crossing_share", &RunConfig::train_crossing_share));
    k.push_back(number_key("dreamer_width", &RunConfig::dreamer_width));
    k.push_back(number_key("dreamer_blocks", &RunConfig::dreamer_blocks));
    k.push_back(number_key("dreamer_heads", &RunConfig::dreamer_heads));
    k.push_back(number_key("dreamer_epochs", &RunConfig::dreamer_epochs));
    k.push_back(number_key("dreamer_starts", &RunConfig::dreamer_starts));
    k.push_back(number_key("dreamer_lr", &RunConfig::dreamer_lr));
    k.push_back(number_key("dreamer_final_lr", &RunConfig::dreamer_final_lr));
    k.push_back(number_key("motion_width", &RunConfig::motion_width));
    k.push_back(number_key("motion_blocks", &RunConfig::motion_blocks));
    k.push_back(number_key("motion_heads", &RunConfig::motion_heads));
    k.push_back(number_key("motion_epochs", &RunConfig::motion_epochs));
    k.push_back(number_key("motion_stride", &RunConfig::motion_stride));
    k.push_back(number_key("motion_lr", &RunConfig::motion_lr));
    k.push_back(number_key("motion_final_lr", &RunConfig::motion_final_lr));
    k.push_back(number_key("scl_epochs", &RunConfig::scl_epochs));
    k.push_back(number_key("scl_weight", &RunConfig::scl_weight));
    k.push_back(number_key("eval_stride", &RunConfig::eval_stride));
    k.push_back(number_key("bench_repeats", &RunConfig::bench_repeats));
    return k;
  }();
  return keys;
}

const Key& find_key(const std::string& name) {
  for (const auto& k : registry()) {
    if (k.name == name) return k;
  }
  throw ValidationError("unknown config key '" + name + "'");
}

constexpr std::uint64_t kTrainSeedBase = 1000;
constexpr std::uint64_t kTrainSeedStride = 100000;
constexpr std::uint64_t kAdversarialOffset = 50000;

ScenarioConfig base_scenario(const RunConfig& c, std::uint64_t seed, int index) {
  ScenarioConfig s;
  s.seed = seed;
  s.n_agents = c.agents;
  s.n_map_elements = c.map_elements;
  s.duration = c.duration;
  s.dt = c.rollout.dt;
  s.ego_profile = static_cast<EgoProfile>(index % 4);
  return s;
}

}  // namespace

void RunConfig::validate() const {
  rollout.validate();
  safety.validate();
  if (jobs < 1) throw ValidationError("jobs must be >= 1");
  if (n_train < 1 || n_eval < 1) throw ValidationError("n_train and n_eval must be >= 1");
  if (agents < 0 || agents > kDefaultAgentSlots) throw ValidationError("agents must be in [0, 32]");
  if (map_elements < 0 || map_elements > kDefaultMapSlots) throw ValidationError("map_elements must be in [0, 8]");
  if (n_crossing < 0 || n_crossing > agents) throw ValidationError("n_crossing must be in [0, agents]");
  if (!(train_crossing_share >= 0.0 && train_crossing_share <= 1.0)) {
    throw ValidationError("train_crossing_share must be in [0, 1]");
  }
  if (duration < rollout.history + rollout.forecast + kPlanningSteps) {
    throw ValidationError("duration must be >= history + forecast + " + std::to_string(kPlanningSteps));
  }
  if (rollout.window > rollout.history) throw ValidationError("window must be <= history");
  for (int v : {dreamer_width, dreamer_blocks, dreamer_heads, dreamer_starts, motion_width, motion_blocks, motion_heads,
                motion_stride, eval_stride, bench_repeats}) {
    if (v < 1) throw ValidationError("model sizes, strides and repeats must be >= 1");
  }
  if (dreamer_epochs < 0 || motion_epochs < 0 || scl_epochs < 0) throw ValidationError("epochs must be >= 0");
  if (!(dreamer_lr > 0.0) || !(motion_lr > 0.0)) throw ValidationError("learning rates must be positive");
  if (!(scl_weight >= 0.0)) throw ValidationError("scl_weight must be >= 0");
  if (std::abs(rollout.dt - 0.5) > 1e-12) throw ValidationError("the models are built for dt = 0.5 s");

  const std::uint64_t train_lo = kTrainSeedBase + seed * kTrainSeedStride;
  const std::uint64_t train_hi = train_lo + static_cast<std::uint64_t>(n_train);
  const std::uint64_t eval_lo = eval_seed;
  const std::uint64_t eval_hi = eval_seed + kAdversarialOffset + static_cast<std::uint64_t>(n_eval);
  if (static_cast<std::uint64_t>(n_train) > kTrainSeedStride || static_cast<std::uint64_t>(n_eval) > kAdversarialOffset) {
    throw ValidationError("split sizes exceed the seed stride");
  }
  if (train_lo < eval_hi && eval_lo < train_hi) {
    throw ValidationError("training seeds [" + std::to_string(train_lo) + ", " + std::to_string(train_hi) +
                          ") overlap the evaluation seeds");
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& k : registry()) out.push_back(k.name);
    return out;
  }();
  return names;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  find_key(key).set(config, value);
}

std::string get_config_value(const RunConfig& config, const std::string& key) { return find_key(key).get(config); }

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    set_config_value(base, trim(std::string_view(text).substr(0, eq)), trim(std::string_view(text).substr(eq + 1)));
  }
  return base;
}

std::string config_hash(const RunConfig& config) {
  // FNV-1a over the canonical listing; paths are excluded so that the same
  // experiment run from different directories hashes identically.
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& k : registry()) {
    if (k.name == "dataset" || k.name == "checkpoint" || k.name == "report" || k.name == "jobs") continue;
    for (char ch : k.name + "=" + k.get(config) + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json config_json(const RunConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : registry()) j[k.name] = k.get(config);
  return j;
}

std::vector<ScenarioConfig> train_split(const RunConfig& config) {
  config.validate();
  std::vector<ScenarioConfig> out;
  const std::uint64_t base = kTrainSeedBase + config.seed * kTrainSeedStride;
  for (int i = 0; i < config.n_train; ++i) {
    ScenarioConfig s = base_scenario(config, base + static_cast<std::uint64_t>(i), i);
    // Spread crossing scenes evenly through the split.
    const double share = config.train_crossing_share;
    const bool crossing = std::floor((i + 1) * share) > std::floor(i * share);
    s.n_crossing = crossing ? config.n_crossing : 0;
    out.push_back(s);
  }
  return out;
}

std::vector<ScenarioConfig> eval_split(const RunConfig& config) {
  config.validate();
  std::vector<ScenarioConfig> out;
  for (int i = 0; i < config.n_eval; ++i) {
    out.push_back(base_scenario(config, config.eval_seed + static_cast<std::uint64_t>(i), i));
  }
  return out;
}

std::vector<ScenarioConfig> adversarial_split(const RunConfig& config) {
  config.validate();
  std::vector<ScenarioConfig> out;
  for (int i = 0; i < config.n_eval; ++i) {
    ScenarioConfig s = base_scenario(config, config.eval_seed + kAdversarialOffset + static_cast<std::uint64_t>(i), i);
    s.n_crossing = config.n_crossing;
    out.push_back(s);
  }
  return out;
}

std::vector<Scenario> generate_all(const std::vector<ScenarioConfig>& configs, int jobs) {
  std::vector<Scenario> out(configs.size());
  detail::parallel_for(static_cast<int>(configs.size()), jobs,
                       [&](int i) { out[static_cast<std::size_t>(i)] = generate(configs[static_cast<std::size_t>(i)]); });
  return out;
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = {{"seed", c.seed},
       {"n_agents", c.n_agents},
       {"n_map_elements", c.n_map_elements},
       {"duration", c.duration},
       {"dt", c.dt},
       {"motion_mix", c.motion_mix},
       {"ego_profile", to_string(c.ego_profile)},
       {"n_crossing", c.n_crossing},
       {"agent_slots", c.agent_slots},
       {"map_slots", c.map_slots}};
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  j.at("seed").get_to(c.seed);
  j.at("n_agents").get_to(c.n_agents);
  j.at("n_map_elements").get_to(c.n_map_elements);
  j.at("duration").get_to(c.duration);
  j.at("dt").get_to(c.dt);
  j.at("motion_mix").get_to(c.motion_mix);
  c.ego_profile = ego_profile_from_string(j.at("ego_profile").get<std::string>());
  j.at("n_crossing").get_to(c.n_crossing);
  j.at("agent_slots").get_to(c.agent_slots);
  j.at("map_slots").get_to(c.map_slots);
}

void save_checkpoint(const std::filesystem::path& path, const Models& models, const nlohmann::json& training) {
  const nlohmann::json j = {{"format", "sparseworld-checkpoint"},
                            {"version", 1},
                            {"dreamer", models.dreamer},
                            {"motion", models.motion},
                            {"training", training}};
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump();
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Models load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingCheckpoint("checkpoint not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != "sparseworld-checkpoint") {
    throw ValidationError(path.string() + " is not a sparseworld checkpoint");
  }
  return {dreamer_from_json(j.at("dreamer")), motion_from_json(j.at("motion"))};
}

void write_report(const std::filesystem::path& path, const nlohmann::json& report) {
  if (path.empty()) return;
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << report.dump(2) << '\n';
  if (!out) throw IoError("failed writing report " + path.string());
}

long peak_rss_kib() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream ss(line.substr(6));
      long kib = 0;
      ss >> kib;
      return kib;
    }
  }
  return 0;
}

}  // namespace sparseworld
