#pragma once

// Sparse dreamer: an attention decoder that refines the kinematic projection
// of the newest frame into the next frame, conditioned on a short window of
// past frames and on the ego action.
//
// Every block runs (pre-norm, residual):
//   self-attention over slots
//   temporal attention of each slot over its own history window
//   cross-attention over the Fourier-encoded action tokens
//   cross-attention over the projected anchors (blocks 2..N)
//   feed-forward
// Output anchors are the projected anchors plus head residuals, so zero
// heads reproduce the projection exactly.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sparseworld/alignment.hpp"
#include "sparseworld/memory.hpp"
#include "sparseworld/nn/layers.hpp"
#include "sparseworld/scene.hpp"
#include "sparseworld/world.hpp"

namespace sparseworld {

struct DreamerConfig {
  int blocks{3};
  int heads{4};
  int width{64};  // c
  int window{3};  // m
  int n_freq{4};
  int planning_steps{kPlanningSteps};
  int map_points{kMapPoints};
  std::uint64_t seed{0};

  void validate() const;
};

/// Inference-time switches. All on reproduces the trained architecture.
struct DreamerSwitches {
  bool use_pe{true};  // relative positional embedding of history frames
  bool use_pp{true};  // pre-projection cross-attention and projected query init
  bool refine_agents{true};
  bool refine_maps{true};
};

inline constexpr int kAgentInputWidth = 14;
inline constexpr int kAgentResidualWidth = 8;  // center 3, heading 2, velocity 3

class DreamerParams {
 public:
  explicit DreamerParams(const DreamerConfig& config);

  [[nodiscard]] const DreamerConfig& config() const noexcept { return config_; }
  [[nodiscard]] nn::ParameterSet& weights() noexcept { return weights_; }
  [[nodiscard]] const nn::ParameterSet& weights() const noexcept { return weights_; }
  [[nodiscard]] int condition_tokens() const noexcept { return 1 + 2 * config_.planning_steps + kSteeringCount; }

  /// Zeroes the refinement and classification heads.
  void zero_heads();

  struct Block {
    nn::LayerNorm ln_self, ln_temporal, ln_action, ln_preproj, ln_ffn;
    nn::MultiHeadAttention self_attn, temporal_attn, action_attn, preproj_attn;
    nn::FeedForward ffn;
    bool has_preproj{false};
  };

  nn::Linear agent_embed;
  nn::Linear map_embed;
  nn::Linear condition_embed;
  nn::Linear pos_embed;
  std::size_t condition_token_table{0};
  std::size_t time_table{0};  // E_time, (m + 1) x c, row = frame age
  std::vector<Block> blocks;
  nn::LayerNorm ln_out;
  nn::Linear agent_head;
  nn::Linear map_head;
  nn::Linear existence_head;

 private:
  DreamerConfig config_;
  nn::ParameterSet weights_;
};

void to_json(nlohmann::json& j, const DreamerConfig& c);
void from_json(const nlohmann::json& j, DreamerConfig& c);
void to_json(nlohmann::json& j, const DreamerParams& p);
/// Rebuilds the architecture from the stored config and loads the weights;
/// throws ShapeMismatch when they disagree.
DreamerParams dreamer_from_json(const nlohmann::json& j);

/// Flattened, scale-normalized condition (speed, T x 2 plan, steering one-hot).
Eigen::VectorXd condition_vector(const ActionCondition& condition, int planning_steps = kPlanningSteps);
/// Sines and cosines of 2^k pi x over the condition vector; length 2 n_freq (1 + 2T + 3).
Eigen::VectorXd fourier_embed(const ActionCondition& condition, int n_freq, int planning_steps = kPlanningSteps);

/// Input rows fed to the anchor embedding.
Eigen::VectorXd agent_input(const AgentAnchor& anchor);
Eigen::VectorXd map_input(const MapAnchor& anchor);

InstanceFeature embed_anchor(const AgentAnchor& anchor, const DreamerParams& params);
InstanceFeature embed_anchor(const MapAnchor& anchor, const DreamerParams& params);

/// Slot is occupied by an instance believed to exist.
inline bool slot_active(const AgentAnchor& a) noexcept { return a.id != kEmptySlot && a.present(); }
inline bool slot_active(const MapAnchor& a) noexcept { return a.id != kEmptySlot && a.present(); }

/// Ego angular velocity implied by the first planned waypoint of a circular
/// arc: the chord leaves the tangent at half the turned angle.
double omega_from_plan(const ActionCondition& condition, double fallback);

/// Ego step between consecutive stored frames, from the older frame's ego.
EgoMotionStep frame_step(const EgoAnchor& ego, double dt) noexcept;

struct DecoderInput {
  std::vector<InstanceSet> window;  // ascending, window.back() = frame t
  InstanceSet projected;            // frame t+1 anchors from the kinematic projection
  ActionCondition condition;
};

/// Next frame from a window and its projection. Throws ShapeMismatch on
/// slot misalignment.
InstanceSet decoder_step(const DecoderInput& input, const DreamerParams& params,
                         const DreamerSwitches& switches = {});

struct TrainSample {
  DecoderInput input;
  InstanceSet target;
};

struct LossBreakdown {
  double total{0.0};
  double regression{0.0};
  double existence{0.0};
};

/// Loss and gradient over a batch; the gradient is the batch mean. Throws
/// NaNLoss when the loss is not finite.
struct StepResult {
  LossBreakdown loss;
  nn::Gradients gradient;
};
StepResult train_step(const std::vector<TrainSample>& batch, const DreamerParams& params);
/// Loss only (used by gradient checks).
LossBreakdown dreamer_loss(const TrainSample& sample, const DreamerParams& params);

/// Source of action conditions during a rollout.
class Planner {
 public:
  virtual ~Planner() = default;
  /// Condition for frame `t` given the queue contents up to `t`.
  virtual ActionCondition plan(const InstanceMemoryQueue& queue, std::int64_t t) = 0;
};

/// Replays the scripted ego conditions of a scenario (frame index = scenario frame).
class OraclePlanner final : public Planner {
 public:
  explicit OraclePlanner(const Scenario& scenario) : scenario_(scenario) {}
  ActionCondition plan(const InstanceMemoryQueue& queue, std::int64_t t) override;

 private:
  const Scenario& scenario_;
};

struct RolloutResult {
  std::vector<InstanceSet> frames;           // I_{t0+1} ... I_{t0+f}
  std::vector<ActionCondition> conditions;   // C_{t0} ... C_{t0+f-1}
  std::vector<EgoMotionStep> steps;
};

/// Autoregressive rollout from the queue's newest frame. Each step asks the
/// planner for C_t, projects frame t, decodes frame t+1 and pushes it.
RolloutResult rollout(InstanceMemoryQueue& queue, const RolloutConfig& config, const DreamerParams& params,
                      Planner& planner, const DreamerSwitches& switches = {});

/// Iterated kinematic projection under the same planner (reference baseline).
RolloutResult projection_rollout(InstanceMemoryQueue& queue, const RolloutConfig& config, Planner& planner);

/// Queue with frames t0 - h ... t0 of a scenario (padded when t0 < h).
InstanceMemoryQueue observed_queue(const Scenario& scenario, int t0, const RolloutConfig& config,
                                   int* padded = nullptr);

struct DreamerTrainOptions {
  int epochs{20};
  int starts_per_scenario{2};
  int batch_size{8};
  double learning_rate{1e-3};
  double final_learning_rate{-1.0};  // cosine annealing target; negative = constant
  double momentum{0.9};
  bool adam{false};
  int jobs{1};
  std::uint64_t seed{0};
  std::function<void(int epoch, double mean_loss)> on_epoch;
};

struct TrainSummary {
  std::vector<double> epoch_loss;
  long steps{0};
};

/// Unrolled training: every sample starts from observed history and rolls
/// forward f steps under scripted conditions, feeding back its own
/// (detached) predictions; each step is scored against ground truth.
TrainSummary train_dreamer(DreamerParams& params, const std::vector<Scenario>& scenarios,
                           const RolloutConfig& config, const DreamerTrainOptions& options);

}  // namespace sparseworld
