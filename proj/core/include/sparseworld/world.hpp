#pragma once

// Deterministic kinematic traffic generator. Every entity moves along exact
// circular arcs between frames (piecewise-constant speed and yaw rate), so
// frame-to-frame ground truth is available in closed form.

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "sparseworld/scene.hpp"

namespace sparseworld {

enum class MotionModel : std::uint8_t { kConstantVelocity, kConstantTurn, kLaneFollow, kStopAndGo };
enum class EgoProfile : std::uint8_t { kStraight, kCurveLeft, kCurveRight, kDecelerate };

inline constexpr int kMotionModelCount = 4;

std::string_view to_string(MotionModel m) noexcept;
std::string_view to_string(EgoProfile p) noexcept;
EgoProfile ego_profile_from_string(std::string_view s);

struct ScenarioConfig {
  std::uint64_t seed{0};
  int n_agents{8};
  int n_map_elements{6};
  int duration{24};
  double dt{0.5};
  /// Weights over {constant-velocity, constant-turn, lane-follow, stop-and-go}.
  std::array<double, kMotionModelCount> motion_mix{0.25, 0.25, 0.25, 0.25};
  EgoProfile ego_profile{EgoProfile::kStraight};
  /// Agents scripted to cross the ego path (adversarial scenes); part of n_agents.
  int n_crossing{0};
  int agent_slots{kDefaultAgentSlots};
  int map_slots{kDefaultMapSlots};

  /// Throws ValidationError on violated invariants, including
  /// duration >= h + f + T for the given rollout configuration.
  void validate(const RolloutConfig& rollout = {}) const;
};

/// Speed schedule of a stop-and-go agent, in intervals (frame i -> i+1).
struct StopAndGo {
  double cruise{5.0};
  int stop_frame{4};
  double decel{2.0};
  int hold_frames{2};

  [[nodiscard]] double speed_for_interval(int interval, double dt) const noexcept;
};

struct EntityState {
  std::int64_t id{0};
  Pose2D pose;  // world frame
  double speed{0.0};
  double turn_rate{0.0};  // holds for the interval starting at this frame
  MotionModel model{MotionModel::kConstantVelocity};
  AgentClass class_label{AgentClass::kVehicle};
  Vec3 size{1.9, 4.5, 1.6};  // (w, l, h)
  bool crossing{false};

  [[nodiscard]] Vec2 velocity() const noexcept;
};

struct WorldState {
  int frame{0};
  std::vector<EntityState> agents;
  Pose2D ego_pose;
  double ego_speed{0.0};
  double ego_omega{0.0};
};

struct AgentScript {
  EntityState initial;
  StopAndGo stop_and_go;
  int lane{-1};  // index into ScenarioPlan::maps for lane-follow agents
};

/// Everything that determines a scenario once the random draws are made.
struct ScenarioPlan {
  std::vector<AgentScript> agents;
  std::vector<MapAnchor> maps;  // world frame, static
  Pose2D ego_start;
  /// Per-interval ego controls; must cover duration + T intervals.
  std::vector<double> ego_speed;
  std::vector<double> ego_omega;
  Vec3 ego_size{1.9, 4.6, 1.6};
};

struct Scenario {
  ScenarioConfig config;
  ScenarioPlan plan;
  std::vector<WorldState> frames;  // duration entries
  std::vector<Pose2D> ego_track;   // duration + T entries

  [[nodiscard]] int duration() const noexcept { return static_cast<int>(frames.size()); }
};

/// Samples a plan from `config.seed` and simulates it. Throws
/// InfeasibleScenario when agent spawn sampling fails 1000 times.
Scenario generate(const ScenarioConfig& config);
ScenarioPlan sample_plan(const ScenarioConfig& config);
Scenario simulate(const ScenarioConfig& config, const ScenarioPlan& plan);

/// Frame-t view: anchors in the frame-t ego frame plus the ego's scripted
/// action condition. Features are left empty.
std::pair<InstanceSet, ActionCondition> ego_frame_view(const Scenario& scenario, int t);

/// Scripted ego condition at frame t: current speed, the next T ego
/// positions in frame t and the steering derived from their curvature.
ActionCondition scripted_condition(const Scenario& scenario, int t);

/// Frames t+1 ... t+f, each in its own ego frame. Throws HorizonOverrun
/// unless t + f < duration.
std::vector<InstanceSet> ground_truth_future(const Scenario& scenario, int t, int f);

/// Ground-truth agent waypoints at t+1 ... t+T expressed in frame t, one per
/// agent slot (empty slots yield zeros). Throws HorizonOverrun.
std::vector<Trajectory> agent_futures_in_frame(const Scenario& scenario, int t, int steps);

/// Ground-truth agent boxes at frame t+k expressed in frame t.
std::vector<AgentAnchor> agents_at_in_frame(const Scenario& scenario, int t, int k);

/// Advances one entity over one interval along its exact arc.
EntityState step_entity(const EntityState& state, double dt) noexcept;

/// Pure-pursuit yaw rate toward `lane` from `state`'s pose (world frame).
double pure_pursuit_turn_rate(const EntityState& state, const MapAnchor& lane) noexcept;

}  // namespace sparseworld
