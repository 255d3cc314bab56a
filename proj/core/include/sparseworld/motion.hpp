#pragma once

// Motion network shared by the baseline planner, the future motion planner
// used inside rollouts and the refinement pass.
//
// Input is a list of frames whose first entry is the current frame; the rest
// are context frames (history or forecasts) identified by their frame index.
// Context anchors are moved into the current frame through the chained ego
// steps, tagged with their signed time offset and attended per slot. The ego
// token additionally attends to every context agent.

#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sparseworld/nn/layers.hpp"
#include "sparseworld/safety.hpp"
#include "sparseworld/scene.hpp"
#include "sparseworld/world.hpp"

namespace sparseworld {

struct MotionConfig {
  int blocks{2};
  int heads{4};
  int width{64};
  int modes{6};  // K
  int planning_steps{kPlanningSteps};
  int map_points{kMapPoints};
  int n_freq{4};
  std::uint64_t seed{0};

  void validate() const;
};

class MotionParams {
 public:
  explicit MotionParams(const MotionConfig& config);

  [[nodiscard]] const MotionConfig& config() const noexcept { return config_; }
  [[nodiscard]] nn::ParameterSet& weights() noexcept { return weights_; }
  [[nodiscard]] const nn::ParameterSet& weights() const noexcept { return weights_; }

  /// Zeroes the agent trajectory head and both ego plan heads.
  void zero_trajectory_heads();
  /// Copies the imitation plan head into the safety-tuned plan head.
  void reset_scl_head();

  struct Block {
    nn::LayerNorm ln_self, ln_temporal, ln_ego, ln_ffn;
    nn::MultiHeadAttention self_attn, temporal_attn, ego_attn;
    nn::FeedForward ffn;
  };

  nn::Linear agent_in, agent_in2;
  nn::Linear map_in, map_in2;
  nn::Linear ego_in, ego_in2;
  nn::Linear time_in;
  std::vector<Block> blocks;
  nn::LayerNorm ln_out;
  nn::Linear traj_head;   // K * T * 2, agent-local frame
  nn::Linear score_head;  // K
  nn::Linear plan_head;   // T * 2, imitation
  nn::Linear plan_head_scl;

 private:
  MotionConfig config_;
  nn::ParameterSet weights_;
};

void to_json(nlohmann::json& j, const MotionConfig& c);
void from_json(const nlohmann::json& j, MotionConfig& c);
void to_json(nlohmann::json& j, const MotionParams& p);
MotionParams motion_from_json(const nlohmann::json& j);

struct MotionOutput {
  std::vector<MultiModalTrajectory> agents;  // one per agent slot, current frame coordinates
  Trajectory ego;
};

/// Runs the network. `use_scl_head` selects the safety-tuned ego head.
/// Throws ShapeMismatch on slot misalignment or when a context frame cannot
/// be chained to the current frame.
MotionOutput predict_motion(const std::vector<InstanceSet>& frames, const MotionParams& params,
                            bool use_scl_head = false);

/// Same network over [current, futures...].
MotionOutput refine_motion(const InstanceSet& current, const std::vector<InstanceSet>& futures,
                           const MotionParams& params, bool use_scl_head = false);

/// Speed from the first step, steering from the mean signed curvature.
ActionCondition to_action_condition(const Trajectory& ego_traj, double prev_speed);

struct AgentPrediction {
  std::int64_t id{kEmptySlot};
  Vec2 position{Vec2::Zero()};
  MultiModalTrajectory trajectory;
};

struct AgentTruth {
  std::int64_t id{kEmptySlot};
  Vec2 position{Vec2::Zero()};
  Trajectory future;
};

struct MotionMetrics {
  double min_ade{0.0};
  double min_fde{0.0};
  double miss_rate{0.0};
  double epa{0.0};
  int matched{0};
  int hits{0};
  int false_positives{0};
  int ground_truth{0};
};

inline constexpr double kMissThreshold = 2.0;
inline constexpr double kMatchThreshold = 2.0;
inline constexpr double kFalsePositivePenalty = 0.5;

/// Matches by id (and center distance <= 2 m at t = 0). minADE/minFDE/MR
/// average over matched agents; EPA = max(0, (hits - 0.5 FP) / N_gt).
/// Throws EmptyGroundTruth without ground-truth agents.
MotionMetrics motion_metrics(const std::vector<AgentPrediction>& predictions, const std::vector<AgentTruth>& truth);

/// Accumulates per-scene counts so that several scenes reduce to one metric set.
struct MotionMetricsAccumulator {
  double ade_sum{0.0};
  double fde_sum{0.0};
  int misses{0};
  int matched{0};
  int hits{0};
  int false_positives{0};
  int ground_truth{0};

  void add(const MotionMetrics& m);
  [[nodiscard]] MotionMetrics result() const;
};

struct MotionSample {
  std::vector<InstanceSet> frames;         // current first
  std::vector<Trajectory> agent_futures;   // ground truth, one per slot
  Trajectory ego_future;                   // ground truth
  std::vector<AgentAnchor> agents_now;     // current anchors, for the safety term
};

struct MotionLoss {
  double total{0.0};
  double agent{0.0};
  double score{0.0};
  double ego{0.0};
  double safety{0.0};
};

struct MotionTrainOptions {
  int epochs{20};
  int batch_size{8};
  double learning_rate{1e-3};
  double final_learning_rate{-1.0};  // cosine annealing target; negative = constant
  double momentum{0.9};
  bool adam{false};
  int jobs{1};
  std::uint64_t seed{0};
  /// Safety fine-tuning: only plan_head_scl is updated and the loss adds
  /// scl_weight times the safety-critical loss of its plan.
  bool scl_phase{false};
  double scl_weight{1.0};
  SafetyConfig safety{};
  std::function<void(int epoch, double mean_loss)> on_epoch;
};

/// Loss of one sample; optionally accumulates its gradient.
MotionLoss motion_loss(const MotionSample& sample, const MotionParams& params, bool scl_phase,
                       double scl_weight, const SafetyConfig& safety, nn::Gradients* gradient);

std::vector<double> train_motion(MotionParams& params, const std::vector<MotionSample>& samples,
                                 const MotionTrainOptions& options);

/// Frames [I_t, I_{t-1}, ..., I_{t-m}] of a scenario (clipped at frame 0).
std::vector<InstanceSet> history_frames(const Scenario& scenario, int t, int m);

/// Ground-truth targets for frame t (requires t + T < duration).
MotionSample motion_sample(const Scenario& scenario, int t, std::vector<InstanceSet> frames);

}  // namespace sparseworld
