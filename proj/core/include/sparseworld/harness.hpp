#pragma once

// Command-level plumbing: run configuration, dataset generation, training,
// evaluation and benchmarking. Every command returns a JSON report.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparseworld/dreamer.hpp"
#include "sparseworld/motion.hpp"
#include "sparseworld/safety.hpp"
#include "sparseworld/selection.hpp"
#include "sparseworld/world.hpp"

namespace sparseworld {

struct AblationFlags {
  bool use_pe{true};
  bool use_pp{true};
  bool use_fif{true};
  bool use_scl{true};
  bool use_ats{true};
  bool refine_agents{true};
  bool refine_maps{true};

  [[nodiscard]] DreamerSwitches dreamer() const noexcept { return {use_pe, use_pp, refine_agents, refine_maps}; }
};

struct RunConfig {
  std::filesystem::path dataset{"data"};
  std::filesystem::path checkpoint{"checkpoint.json"};
  std::filesystem::path report{"report.json"};

  std::uint64_t seed{0};
  int jobs{1};
  RolloutConfig rollout{};
  SafetyConfig safety{};
  AblationFlags flags{};

  // Scenario generation.
  int n_train{300};
  int n_eval{50};
  std::uint64_t eval_seed{900000};
  int agents{8};
  int map_elements{6};
  int duration{24};
  int n_crossing{2};             // crossing agents in adversarial scenes
  double train_crossing_share{0.5};  // share of training scenes with crossing agents

  // Dreamer.
  int dreamer_width{64};
  int dreamer_blocks{3};
  int dreamer_heads{4};
  int dreamer_epochs{14};
  int dreamer_starts{2};
  double dreamer_lr{1e-3};
  double dreamer_final_lr{5e-5};

  // Motion network.
  int motion_width{64};
  int motion_blocks{2};
  int motion_heads{4};
  int motion_epochs{8};
  int motion_stride{2};
  double motion_lr{1e-3};
  double motion_final_lr{5e-5};
  int scl_epochs{30};
  double scl_weight{1.0};

  // Evaluation.
  int eval_stride{3};

  // Benchmark.
  int bench_repeats{5};

  /// Throws ValidationError on out-of-range values.
  void validate() const;
};

/// Names of every configuration key; each is also a CLI flag of the same name.
const std::vector<std::string>& config_keys();
/// Sets one key from its textual value. Throws ValidationError on unknown
/// keys or unparsable values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

/// Parses `key = value` lines; `#` starts a comment. Throws IoError when the
/// file cannot be read and ValidationError on malformed lines.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
/// Hex digest over the canonical `key=value` listing.
std::string config_hash(const RunConfig& config);
nlohmann::json config_json(const RunConfig& config);

/// Scenario configs of the three splits. Seeds of the training split and the
/// evaluation splits never overlap (validated).
std::vector<ScenarioConfig> train_split(const RunConfig& config);
std::vector<ScenarioConfig> eval_split(const RunConfig& config);
std::vector<ScenarioConfig> adversarial_split(const RunConfig& config);
std::vector<Scenario> generate_all(const std::vector<ScenarioConfig>& configs, int jobs);

void to_json(nlohmann::json& j, const ScenarioConfig& c);
void from_json(const nlohmann::json& j, ScenarioConfig& c);

struct Models {
  DreamerParams dreamer;
  MotionParams motion;
};

void save_checkpoint(const std::filesystem::path& path, const Models& models, const nlohmann::json& training);
/// Throws MissingCheckpoint when the file is absent, IoError when unreadable.
Models load_checkpoint(const std::filesystem::path& path);

/// Future motion planner: runs the motion network on the newest queue
/// frames and turns its ego plan into the next action condition.
class FmpPlanner final : public Planner {
 public:
  FmpPlanner(const MotionParams& params, int window, bool use_scl_head);
  ActionCondition plan(const InstanceMemoryQueue& queue, std::int64_t t) override;

 private:
  const MotionParams& params_;
  int window_;
  bool use_scl_head_;
};

/// Ego path of a rollout expressed in its start frame: the executed
/// condition steps for the first f waypoints, then the last plan.
Trajectory rollout_ego_path(const RolloutResult& rollout, int steps);

// Forecast metrics.
inline constexpr std::array<double, 4> kApThresholds{0.5, 1.0, 2.0, 4.0};

struct ForecastAccumulator {
  std::vector<double> l2_sum;
  std::vector<long> l2_count;
  std::vector<double> chamfer_sum;
  std::vector<long> chamfer_count;
  // (confidence, is-true-positive) per threshold, pooled over frames.
  std::vector<std::vector<std::pair<double, bool>>> detections;
  long ground_truth{0};

  explicit ForecastAccumulator(int horizons);
  void add(int horizon, const InstanceSet& predicted, const InstanceSet& truth);
  [[nodiscard]] nlohmann::json result(double dt) const;
};

/// Symmetric Chamfer distance between two polylines' points.
double chamfer_distance(const std::vector<Vec2>& a, const std::vector<Vec2>& b);
/// Average precision with greedy center-distance matching; detections are
/// (confidence, true positive) pairs.
double average_precision(std::vector<std::pair<double, bool>> detections, long ground_truth);

// Planning metrics at 1, 2, 3 s (cumulative averages over steps).
struct PlanningAccumulator {
  std::array<double, kPlanningSteps> l2_sum{};
  std::array<long, kPlanningSteps> collisions{};
  long scenes{0};

  void add(const Trajectory& executed, const Trajectory& truth, const std::vector<bool>& collided);
  [[nodiscard]] nlohmann::json result() const;
  [[nodiscard]] double mean_l2() const;
  [[nodiscard]] double mean_collision() const;
};

/// Per-step collision of the executed plan against ground-truth agent boxes.
std::vector<bool> ground_truth_collisions(const Scenario& scenario, int t, const Trajectory& executed);

struct PlanningResult {
  PlanningAccumulator baseline;
  PlanningAccumulator selected;  // per the configured flags
  std::map<std::string, PlanningAccumulator> ladder;
  MotionMetricsAccumulator motion_baseline;
  MotionMetricsAccumulator motion_refined;
  std::map<std::string, long> chosen;
  long fallbacks{0};
  double scl_sum{0.0};
  long selections{0};
};

PlanningResult evaluate_planning(const RunConfig& config, const Models& models, const std::vector<Scenario>& scenes);

struct ForecastResult {
  ForecastAccumulator copy_paste;
  ForecastAccumulator projection;
  ForecastAccumulator dreamer;
};

ForecastResult evaluate_forecast(const RunConfig& config, const Models& models, const std::vector<Scenario>& scenes);

// Commands. Each validates the config, returns the report and writes it to
// config.report (pretty-printed) unless the path is empty.
nlohmann::json cmd_gen(const RunConfig& config);
nlohmann::json cmd_train(const RunConfig& config, std::function<void(const std::string&)> log = {});
nlohmann::json cmd_rollout(const RunConfig& config);
nlohmann::json cmd_plan(const RunConfig& config);
nlohmann::json cmd_eval(const RunConfig& config);
nlohmann::json cmd_bench(const RunConfig& config);

/// Writes `report` as pretty-printed JSON. Throws IoError.
void write_report(const std::filesystem::path& path, const nlohmann::json& report);

/// Peak resident set size of this process in KiB (0 when unavailable).
long peak_rss_kib();

}  // namespace sparseworld
