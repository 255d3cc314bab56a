#include "sparseworld/motion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "sparseworld/dreamer.hpp"
#include "sparseworld/errors.hpp"

namespace sparseworld {

using nn::Graph;
using nn::Mask;
using nn::Matrix;
using nn::Var;

namespace {

constexpr double kTrajScale = 10.0;  // head outputs are in units of 10 m
constexpr double kTimeScale = 8.0;   // frame offsets are divided by this before the Fourier map
constexpr double kSpeedScale = 10.0;
constexpr double kSmoothL1Beta = 0.5;
constexpr double kScoreWeight = 0.5;
constexpr int kEgoInputWidth = 3;

Matrix ego_row(const EgoAnchor& ego) {
  Matrix m(1, kEgoInputWidth);
  m << ego.velocity.x() / kSpeedScale, ego.angular_velocity, ego.velocity.y() / kSpeedScale;
  return m;
}

Matrix agent_rows(const std::vector<AgentInstance>& agents) {
  Matrix m(static_cast<Eigen::Index>(agents.size()), kAgentInputWidth);
  for (std::size_t i = 0; i < agents.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = agent_input(agents[i].anchor);
  return m;
}

Matrix map_rows(const std::vector<MapInstance>& maps, int points) {
  Matrix m(static_cast<Eigen::Index>(maps.size()), 2 * points + kMapClassCount);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (static_cast<int>(maps[i].anchor.points.size()) != points) {
      throw ShapeMismatch("map polyline has " + std::to_string(maps[i].anchor.points.size()) + " points, expected " +
                          std::to_string(points));
    }
    m.row(static_cast<Eigen::Index>(i)) = map_input(maps[i].anchor);
  }
  return m;
}

Var mlp(Graph& g, const nn::Linear& a, const nn::Linear& b, Matrix input) {
  return b(g, g.gelu(a(g, g.constant(std::move(input)))));
}

// Pose of every frame inside the current (first) frame, chained through the
// ego anchors of the intermediate frames.
std::vector<Pose2D> poses_in_current(const std::vector<InstanceSet>& frames, double dt) {
  std::map<std::int64_t, const InstanceSet*> by_index;
  for (const auto& f : frames) {
    if (!by_index.emplace(f.frame_index, &f).second) {
      throw ShapeMismatch("frame index " + std::to_string(f.frame_index) + " appears twice");
    }
  }
  const std::int64_t cur = frames.front().frame_index;
  auto find = [&](std::int64_t idx) -> const InstanceSet& {
    auto it = by_index.find(idx);
    if (it == by_index.end()) {
      throw ShapeMismatch("frame " + std::to_string(idx) + " is needed to chain the context to the current frame");
    }
    return *it->second;
  };
  std::map<std::int64_t, Pose2D> pose{{cur, Pose2D{}}};
  const std::int64_t lo = by_index.begin()->first;
  const std::int64_t hi = by_index.rbegin()->first;
  for (std::int64_t j = cur + 1; j <= hi; ++j) {
    pose[j] = pose[j - 1].compose(frame_step(find(j - 1).ego, dt).pose());
  }
  for (std::int64_t j = cur - 1; j >= lo; --j) {
    pose[j] = pose[j + 1].compose(frame_step(find(j).ego, dt).pose().inverse());
  }
  std::vector<Pose2D> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(pose.at(f.frame_index));
  return out;
}

struct Forward {
  Var traj;    // A x (K*T*2), agent-local, scaled
  Var scores;  // A x K
  Var plan;    // 1 x (T*2)
  Var plan_scl;
  Var ego_hidden;  // 1 x c
  Eigen::Index agents{0};
};

Forward forward(Graph& g, const MotionParams& p, const std::vector<InstanceSet>& frames) {
  if (frames.empty()) throw ShapeMismatch("motion network needs at least one frame");
  const auto& cfg = p.config();
  const InstanceSet& cur = frames.front();
  const auto A = static_cast<Eigen::Index>(cur.agents.size());
  const auto M = static_cast<Eigen::Index>(cur.maps.size());
  const int G = static_cast<int>(frames.size());
  for (const auto& f : frames) {
    if (static_cast<Eigen::Index>(f.agents.size()) != A) throw ShapeMismatch("context frames disagree on agent slots");
  }
  const double dt = 0.5;
  const std::vector<Pose2D> poses = poses_in_current(frames, dt);

  std::vector<bool> cur_active(static_cast<std::size_t>(A));
  for (Eigen::Index i = 0; i < A; ++i) cur_active[static_cast<std::size_t>(i)] = slot_active(cur.agents[static_cast<std::size_t>(i)].anchor);

  // Context tokens, frame-major.
  std::vector<Var> agent_ctx;
  std::vector<Var> ego_ctx;
  Mask temporal_mask(std::max<Eigen::Index>(A, 1), G);
  Mask ego_mask(1, G * A + G);
  ego_mask.setConstant(true);
  Var current_agents;
  for (int k = 0; k < G; ++k) {
    const InstanceSet& f = frames[static_cast<std::size_t>(k)];
    Matrix offset(1, 1);
    offset(0, 0) = static_cast<double>(f.frame_index - cur.frame_index) / kTimeScale;
    const Var time = p.time_in(g, g.constant(nn::fourier_features(offset, cfg.n_freq)));
    ego_ctx.push_back(g.add(mlp(g, p.ego_in, p.ego_in2, ego_row(f.ego)), time));
    if (A == 0) continue;
    const InstanceSet aligned = k == 0 ? f : transform_instances(f, poses[static_cast<std::size_t>(k)]);
    const Var enc = mlp(g, p.agent_in, p.agent_in2, agent_rows(aligned.agents));
    if (k == 0) current_agents = enc;
    agent_ctx.push_back(g.add_row(enc, time));
    for (Eigen::Index i = 0; i < A; ++i) {
      const auto& a = f.agents[static_cast<std::size_t>(i)].anchor;
      const bool ok = cur_active[static_cast<std::size_t>(i)] && slot_active(a) &&
                      a.id == cur.agents[static_cast<std::size_t>(i)].anchor.id;
      temporal_mask(i, k) = ok;
      ego_mask(0, k * A + i) = ok;
    }
  }

  Var temporal_memory;
  Var ego_memory;
  {
    std::vector<Var> parts;
    if (A > 0) {
      const Var frame_major = g.concat_rows(agent_ctx);
      std::vector<int> regroup(static_cast<std::size_t>(A * G));
      for (Eigen::Index i = 0; i < A; ++i) {
        for (int k = 0; k < G; ++k) regroup[static_cast<std::size_t>(i * G + k)] = static_cast<int>(k * A + i);
      }
      temporal_memory = g.gather_rows(frame_major, regroup);
      parts.push_back(frame_major);
    }
    parts.push_back(g.concat_rows(ego_ctx));
    ego_memory = g.concat_rows(parts);
  }

  // Query tokens: ego, agents, maps.
  std::vector<Var> rows{mlp(g, p.ego_in, p.ego_in2, ego_row(cur.ego))};
  if (A > 0) rows.push_back(current_agents);
  if (M > 0) rows.push_back(mlp(g, p.map_in, p.map_in2, map_rows(cur.maps, cfg.map_points)));
  Var x = g.concat_rows(rows);
  const Eigen::Index n = 1 + A + M;

  Mask self_mask(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    bool active = true;
    if (j >= 1 && j <= A) active = cur_active[static_cast<std::size_t>(j - 1)];
    if (j > A) active = slot_active(cur.maps[static_cast<std::size_t>(j - 1 - A)].anchor);
    self_mask.col(j).setConstant(active);
  }
  const Var zero_ego = g.constant(Matrix::Zero(1, cfg.width));
  const Var zero_rest = g.constant(Matrix::Zero(A + M, cfg.width));
  const Var zero_maps = M > 0 ? g.constant(Matrix::Zero(M, cfg.width)) : Var{};

  for (const auto& blk : p.blocks) {
    const Var h = blk.ln_self(g, x);
    x = g.add(x, blk.self_attn(g, h, h, self_mask));
    if (A > 0) {
      const Var ha = g.slice_rows(blk.ln_temporal(g, x), 1, A);
      std::vector<Var> parts{zero_ego, blk.temporal_attn.grouped(g, ha, temporal_memory, temporal_mask, G)};
      if (M > 0) parts.push_back(zero_maps);
      x = g.add(x, g.concat_rows(parts));
    }
    const Var he = g.slice_rows(blk.ln_ego(g, x), 0, 1);
    const Var de = blk.ego_attn(g, he, ego_memory, ego_mask);
    x = g.add(x, n > 1 ? g.concat_rows(std::vector<Var>{de, zero_rest}) : de);
    x = g.add(x, blk.ffn(g, blk.ln_ffn(g, x)));
  }

  Forward out;
  const Var hidden = p.ln_out(g, x);
  out.agents = A;
  out.ego_hidden = g.slice_rows(hidden, 0, 1);
  out.plan = g.scale(p.plan_head(g, out.ego_hidden), kTrajScale);
  out.plan_scl = g.scale(p.plan_head_scl(g, out.ego_hidden), kTrajScale);
  if (A > 0) {
    const Var ha = g.slice_rows(hidden, 1, A);
    out.traj = g.scale(p.traj_head(g, ha), kTrajScale);
    out.scores = p.score_head(g, ha);
  }
  return out;
}

Trajectory plan_from_row(const Matrix& row, int T) {
  Trajectory t;
  t.waypoints.resize(static_cast<std::size_t>(T));
  for (int s = 0; s < T; ++s) t.waypoints[static_cast<std::size_t>(s)] = {row(0, 2 * s), row(0, 2 * s + 1)};
  return t;
}

MotionOutput assemble(const Graph& g, const Forward& fw, const InstanceSet& cur, const MotionConfig& cfg,
                      bool use_scl_head) {
  const int K = cfg.modes;
  const int T = cfg.planning_steps;
  MotionOutput out;
  out.ego = plan_from_row(g.value(use_scl_head ? fw.plan_scl : fw.plan), T);
  out.agents.resize(static_cast<std::size_t>(fw.agents));
  for (Eigen::Index i = 0; i < fw.agents; ++i) {
    const auto& a = cur.agents[static_cast<std::size_t>(i)].anchor;
    if (!slot_active(a)) continue;
    auto& mm = out.agents[static_cast<std::size_t>(i)];
    const auto traj = g.value(fw.traj).row(i);
    const auto scores = g.value(fw.scores).row(i);
    const Vec2 center{a.center.x(), a.center.y()};
    const double yaw = a.heading.angle();
    for (int k = 0; k < K; ++k) {
      Trajectory t;
      for (int s = 0; s < T; ++s) {
        const Eigen::Index c = (static_cast<Eigen::Index>(k) * T + s) * 2;
        t.waypoints.push_back(center + rotate2d({traj(c), traj(c + 1)}, yaw));
      }
      mm.modes.push_back(std::move(t));
      mm.scores.push_back(scores(k));
    }
  }
  return out;
}

}  // namespace

void MotionConfig::validate() const {
  if (blocks < 1) throw ValidationError("motion network needs at least one block");
  if (heads < 1 || width < heads || width % heads != 0) throw ValidationError("width must be a multiple of heads");
  if (modes < 1) throw ValidationError("modes must be >= 1");
  if (planning_steps < 1) throw ValidationError("planning_steps must be >= 1");
  if (map_points < 2) throw ValidationError("map_points must be >= 2");
  if (n_freq < 1) throw ValidationError("n_freq must be >= 1");
}

MotionParams::MotionParams(const MotionConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const Eigen::Index c = config_.width;
  auto& ps = weights_;
  agent_in = nn::Linear::create(ps, "motion.agent_in", kAgentInputWidth, c, rng);
  agent_in2 = nn::Linear::create(ps, "motion.agent_in2", c, c, rng);
  map_in = nn::Linear::create(ps, "motion.map_in", 2 * config_.map_points + kMapClassCount, c, rng);
  map_in2 = nn::Linear::create(ps, "motion.map_in2", c, c, rng);
  ego_in = nn::Linear::create(ps, "motion.ego_in", kEgoInputWidth, c, rng);
  ego_in2 = nn::Linear::create(ps, "motion.ego_in2", c, c, rng);
  time_in = nn::Linear::create(ps, "motion.time", 2 * config_.n_freq, c, rng);
  for (int b = 0; b < config_.blocks; ++b) {
    const std::string p = "motion.block" + std::to_string(b);
    Block blk;
    blk.ln_self = nn::LayerNorm::create(ps, p + ".ln_self", c);
    blk.self_attn = nn::MultiHeadAttention::create(ps, p + ".self", c, config_.heads, rng);
    blk.ln_temporal = nn::LayerNorm::create(ps, p + ".ln_temporal", c);
    blk.temporal_attn = nn::MultiHeadAttention::create(ps, p + ".temporal", c, config_.heads, rng);
    blk.ln_ego = nn::LayerNorm::create(ps, p + ".ln_ego", c);
    blk.ego_attn = nn::MultiHeadAttention::create(ps, p + ".ego", c, config_.heads, rng);
    blk.ln_ffn = nn::LayerNorm::create(ps, p + ".ln_ffn", c);
    blk.ffn = nn::FeedForward::create(ps, p + ".ffn", c, 4 * c, rng);
    blocks.push_back(blk);
  }
  ln_out = nn::LayerNorm::create(ps, "motion.ln_out", c);
  const int T = config_.planning_steps;
  traj_head = nn::Linear::create(ps, "motion.head.traj", c, static_cast<Eigen::Index>(config_.modes) * T * 2, rng);
  score_head = nn::Linear::create(ps, "motion.head.score", c, config_.modes, rng);
  plan_head = nn::Linear::create(ps, "motion.head.plan", c, 2 * T, rng);
  plan_head_scl = nn::Linear::create(ps, "motion.head.plan_scl", c, 2 * T, rng);
  reset_scl_head();
}

void MotionParams::zero_trajectory_heads() {
  for (const auto* l : {&traj_head, &plan_head, &plan_head_scl}) {
    weights_.value(l->weight).setZero();
    weights_.value(l->bias).setZero();
  }
}

void MotionParams::reset_scl_head() {
  weights_.value(plan_head_scl.weight) = weights_.value(plan_head.weight);
  weights_.value(plan_head_scl.bias) = weights_.value(plan_head.bias);
}

void to_json(nlohmann::json& j, const MotionConfig& c) {
  j = {{"blocks", c.blocks}, {"heads", c.heads},
       {"width", c.width},   {"modes", c.modes},
       {"planning_steps", c.planning_steps}, {"map_points", c.map_points},
       {"n_freq", c.n_freq}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, MotionConfig& c) {
  j.at("blocks").get_to(c.blocks);
  j.at("heads").get_to(c.heads);
  j.at("width").get_to(c.width);
  j.at("modes").get_to(c.modes);
  j.at("planning_steps").get_to(c.planning_steps);
  j.at("map_points").get_to(c.map_points);
  j.at("n_freq").get_to(c.n_freq);
  j.at("seed").get_to(c.seed);
}

void to_json(nlohmann::json& j, const MotionParams& p) { j = {{"config", p.config()}, {"weights", p.weights()}}; }

MotionParams motion_from_json(const nlohmann::json& j) {
  MotionParams p(j.at("config").get<MotionConfig>());
  p.weights().load_values(nn::parameters_from_json(j.at("weights")));
  if (!p.weights().all_finite()) throw ValidationError("motion checkpoint contains non-finite weights");
  return p;
}

MotionOutput predict_motion(const std::vector<InstanceSet>& frames, const MotionParams& params, bool use_scl_head) {
  Graph g(&params.weights(), false);
  const Forward fw = forward(g, params, frames);
  return assemble(g, fw, frames.front(), params.config(), use_scl_head);
}

MotionOutput refine_motion(const InstanceSet& current, const std::vector<InstanceSet>& futures,
                           const MotionParams& params, bool use_scl_head) {
  std::vector<InstanceSet> frames;
  frames.reserve(futures.size() + 1);
  frames.push_back(current);
  for (const auto& f : futures) {
    if (f.agents.size() != current.agents.size()) throw ShapeMismatch("future frame is not slot-aligned");
    for (std::size_t i = 0; i < f.agents.size(); ++i) {
      if (f.agents[i].anchor.id != current.agents[i].anchor.id && f.agents[i].anchor.id != kEmptySlot &&
          current.agents[i].anchor.id != kEmptySlot) {
        throw ShapeMismatch("future agent slot " + std::to_string(i) + " holds a different instance");
      }
    }
    frames.push_back(f);
  }
  return predict_motion(frames, params, use_scl_head);
}

ActionCondition to_action_condition(const Trajectory& ego_traj, double prev_speed) {
  ActionCondition c;
  c.planned = ego_traj;
  if (ego_traj.waypoints.empty() || !(ego_traj.dt > 0.0)) {
    c.speed = prev_speed;
    return c;
  }
  c.speed = ego_traj.waypoints.front().norm() / ego_traj.dt;
  c.steering = steering_from_curvature(mean_signed_curvature(ego_traj));
  return c;
}

MotionMetrics motion_metrics(const std::vector<AgentPrediction>& predictions, const std::vector<AgentTruth>& truth) {
  if (truth.empty()) throw EmptyGroundTruth("motion metrics need at least one ground-truth agent");
  MotionMetricsAccumulator acc;
  acc.ground_truth = static_cast<int>(truth.size());
  std::vector<bool> used(truth.size(), false);
  for (const auto& pred : predictions) {
    std::size_t match = truth.size();
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (!used[j] && truth[j].id == pred.id && (truth[j].position - pred.position).norm() <= kMatchThreshold) {
        match = j;
        break;
      }
    }
    if (match == truth.size()) {
      ++acc.false_positives;
      continue;
    }
    used[match] = true;
    const Trajectory& gt = truth[match].future;
    if (gt.steps() == 0 || pred.trajectory.modes.empty()) throw ShapeMismatch("empty trajectory in motion metrics");
    double best_ade = std::numeric_limits<double>::infinity();
    double best_fde = std::numeric_limits<double>::infinity();
    for (const auto& mode : pred.trajectory.modes) {
      if (mode.steps() != gt.steps()) throw ShapeMismatch("prediction and ground truth differ in length");
      double sum = 0.0;
      for (std::size_t s = 0; s < gt.steps(); ++s) sum += (mode.waypoints[s] - gt.waypoints[s]).norm();
      best_ade = std::min(best_ade, sum / static_cast<double>(gt.steps()));
      best_fde = std::min(best_fde, (mode.waypoints.back() - gt.waypoints.back()).norm());
    }
    ++acc.matched;
    acc.ade_sum += best_ade;
    acc.fde_sum += best_fde;
    if (best_fde > kMissThreshold) {
      ++acc.misses;
    } else {
      ++acc.hits;
    }
  }
  return acc.result();
}

void MotionMetricsAccumulator::add(const MotionMetrics& m) {
  ade_sum += m.min_ade * m.matched;
  fde_sum += m.min_fde * m.matched;
  misses += static_cast<int>(std::lround(m.miss_rate * m.matched));
  matched += m.matched;
  hits += m.hits;
  false_positives += m.false_positives;
  ground_truth += m.ground_truth;
}

MotionMetrics MotionMetricsAccumulator::result() const {
  MotionMetrics m;
  m.matched = matched;
  m.hits = hits;
  m.false_positives = false_positives;
  m.ground_truth = ground_truth;
  if (matched > 0) {
    m.min_ade = ade_sum / matched;
    m.min_fde = fde_sum / matched;
    m.miss_rate = static_cast<double>(misses) / matched;
  }
  if (ground_truth > 0) {
    m.epa = std::max(0.0, (hits - kFalsePositivePenalty * false_positives) / static_cast<double>(ground_truth));
  }
  return m;
}

namespace {

struct LossVars {
  Var total;
  MotionLoss values;
};

// Imitation loss of one plan against the ground-truth ego future.
Var plan_loss(Graph& g, Var plan, const Trajectory& target, int T) {
  Matrix tgt(1, 2 * T);
  for (int s = 0; s < T; ++s) {
    tgt(0, 2 * s) = target.waypoints[static_cast<std::size_t>(s)].x();
    tgt(0, 2 * s + 1) = target.waypoints[static_cast<std::size_t>(s)].y();
  }
  return g.smooth_l1(plan, tgt, Matrix::Constant(1, 2 * T, 1.0 / T), kSmoothL1Beta);
}

// Safety term as a linear surrogate: its value is scl(sav(plan)) and its
// gradient is the subgradient -dir_t / n_nonzero at every adjusted step.
Var safety_term(Graph& g, Var plan, const MotionSample& s, const SafetyConfig& safety, int T, double& value) {
  Trajectory traj = plan_from_row(g.value(plan), T);
  std::vector<AgentAnchor> agents;
  std::vector<Trajectory> trajs;
  for (std::size_t i = 0; i < s.agents_now.size(); ++i) {
    if (!slot_active(s.agents_now[i])) continue;
    agents.push_back(s.agents_now[i]);
    trajs.push_back(s.agent_futures[i]);
  }
  const AdjustmentVector v = sav(traj, agents, trajs, safety, s.frames.front().ego);
  value = scl(v);
  Matrix w = Matrix::Zero(1, 2 * T);
  int nonzero = 0;
  for (const Vec2& step : v) nonzero += step.norm() != 0.0 ? 1 : 0;
  if (nonzero == 0) return Var{};
  for (int t = 0; t < T; ++t) {
    const Vec2& step = v[static_cast<std::size_t>(t)];
    const double n = step.norm();
    if (n == 0.0) continue;
    w(0, 2 * t) = -step.x() / n / nonzero;
    w(0, 2 * t + 1) = -step.y() / n / nonzero;
  }
  return g.weighted_sum(plan, w);
}

LossVars loss_graph(Graph& g, const Forward& fw, const MotionSample& s, const MotionConfig& cfg) {
  const int K = cfg.modes;
  const int T = cfg.planning_steps;
  const InstanceSet& cur = s.frames.front();
  const Eigen::Index A = fw.agents;
  if (static_cast<Eigen::Index>(s.agent_futures.size()) != A) throw ShapeMismatch("one future per agent slot");
  LossVars out;
  Var total = plan_loss(g, fw.plan, s.ego_future, T);
  out.values.ego = g.scalar(total);

  int active = 0;
  for (Eigen::Index i = 0; i < A; ++i) active += slot_active(cur.agents[static_cast<std::size_t>(i)].anchor) ? 1 : 0;
  if (active > 0) {
    const Matrix& pred = g.value(fw.traj);
    Matrix tgt = Matrix::Zero(A, static_cast<Eigen::Index>(K) * T * 2);
    Matrix w = Matrix::Zero(A, tgt.cols());
    std::vector<int> labels(static_cast<std::size_t>(A), 0);
    std::vector<double> label_w(static_cast<std::size_t>(A), 0.0);
    for (Eigen::Index i = 0; i < A; ++i) {
      const auto& a = cur.agents[static_cast<std::size_t>(i)].anchor;
      if (!slot_active(a)) continue;
      const Vec2 center{a.center.x(), a.center.y()};
      const double yaw = a.heading.angle();
      std::vector<Vec2> local(static_cast<std::size_t>(T));
      for (int t = 0; t < T; ++t) {
        local[static_cast<std::size_t>(t)] =
            rotate2d(s.agent_futures[static_cast<std::size_t>(i)].waypoints[static_cast<std::size_t>(t)] - center, -yaw);
      }
      int best = 0;
      double best_err = std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        double err = 0.0;
        for (int t = 0; t < T; ++t) {
          const Eigen::Index c = (static_cast<Eigen::Index>(k) * T + t) * 2;
          err += (Vec2{pred(i, c), pred(i, c + 1)} - local[static_cast<std::size_t>(t)]).norm();
        }
        if (err < best_err) {
          best_err = err;
          best = k;
        }
      }
      for (int k = 0; k < K; ++k) {
        for (int t = 0; t < T; ++t) {
          const Eigen::Index c = (static_cast<Eigen::Index>(k) * T + t) * 2;
          tgt(i, c) = local[static_cast<std::size_t>(t)].x();
          tgt(i, c + 1) = local[static_cast<std::size_t>(t)].y();
          if (k == best) w.block(i, c, 1, 2).setConstant(1.0 / (static_cast<double>(active) * T));
        }
      }
      labels[static_cast<std::size_t>(i)] = best;
      label_w[static_cast<std::size_t>(i)] = 1.0 / active;
    }
    const Var agent = g.smooth_l1(fw.traj, tgt, w, kSmoothL1Beta);
    const Var score = g.cross_entropy_rows(fw.scores, labels, label_w);
    out.values.agent = g.scalar(agent);
    out.values.score = g.scalar(score);
    total = g.add(total, g.add(agent, g.scale(score, kScoreWeight)));
  }
  out.total = total;
  out.values.total = g.scalar(total);
  return out;
}

void check_finite(const MotionLoss& l) {
  if (!std::isfinite(l.total)) throw NaNLoss("motion loss is not finite");
}

}  // namespace

namespace {

LossVars safety_phase_loss(Graph& g, Var plan, const MotionSample& sample, double scl_weight,
                           const SafetyConfig& safety, int T) {
  LossVars lv;
  Var total = plan_loss(g, plan, sample.ego_future, T);
  lv.values.ego = g.scalar(total);
  const Var safe = safety_term(g, plan, sample, safety, T, lv.values.safety);
  if (safe.valid()) total = g.add(total, g.scale(safe, scl_weight));
  lv.total = total;
  lv.values.total = lv.values.ego + scl_weight * lv.values.safety;
  return lv;
}

void finish(Graph& g, const LossVars& lv, nn::Gradients* gradient) {
  check_finite(lv.values);
  if (gradient != nullptr) {
    g.backward(lv.total);
    g.accumulate_param_grads(*gradient);
  }
}

}  // namespace

MotionLoss motion_loss(const MotionSample& sample, const MotionParams& params, bool scl_phase, double scl_weight,
                       const SafetyConfig& safety, nn::Gradients* gradient) {
  Graph g(&params.weights(), gradient != nullptr);
  const Forward fw = forward(g, params, sample.frames);
  const LossVars lv = scl_phase ? safety_phase_loss(g, fw.plan_scl, sample, scl_weight, safety,
                                                    params.config().planning_steps)
                                : loss_graph(g, fw, sample, params.config());
  finish(g, lv, gradient);
  return lv.values;
}

std::vector<double> train_motion(MotionParams& params, const std::vector<MotionSample>& samples,
                                 const MotionTrainOptions& options) {
  if (samples.empty()) throw ValidationError("no motion training samples");
  options.safety.validate();
  std::mt19937_64 rng(options.seed);
  nn::SgdMomentum sgd(options.learning_rate, options.momentum);
  nn::Adam adam(options.learning_rate);
  if (options.scl_phase) {
    const std::vector<std::string> head{"motion.head.plan_scl"};
    sgd.set_trainable_prefixes(head);
    adam.set_trainable_prefixes(head);
  }
  // The safety phase only moves the safety-tuned plan head, so the ego
  // features are computed once up front.
  std::vector<Matrix> ego_hidden;
  if (options.scl_phase) {
    ego_hidden.resize(samples.size());
    detail::parallel_for(static_cast<int>(samples.size()), options.jobs, [&](int i) {
      Graph g(&params.weights(), false);
      ego_hidden[static_cast<std::size_t>(i)] = g.value(forward(g, params, samples[static_cast<std::size_t>(i)].frames).ego_hidden);
    });
  }
  auto sample_loss = [&](std::size_t idx, nn::Gradients& grad) {
    if (!options.scl_phase) {
      return motion_loss(samples[idx], params, false, options.scl_weight, options.safety, &grad).total;
    }
    Graph g(&params.weights(), true);
    const Var plan = g.scale(params.plan_head_scl(g, g.constant(ego_hidden[idx])), kTrajScale);
    const LossVars lv = safety_phase_loss(g, plan, samples[idx], options.scl_weight, options.safety,
                                          params.config().planning_steps);
    finish(g, lv, &grad);
    return lv.values.total;
  };

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = nn::cosine_learning_rate(options.learning_rate, options.final_learning_rate, epoch, options.epochs);
    sgd.set_learning_rate(lr);
    adam.set_learning_rate(lr);
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(options.batch_size)) {
      const int n = static_cast<int>(std::min(order.size() - b0, static_cast<std::size_t>(options.batch_size)));
      std::vector<nn::Gradients> grads(static_cast<std::size_t>(n));
      std::vector<double> losses(static_cast<std::size_t>(n), 0.0);
      detail::parallel_for(n, options.jobs, [&](int i) {
        auto& grad = grads[static_cast<std::size_t>(i)];
        grad = params.weights().zero_gradients();
        losses[static_cast<std::size_t>(i)] = sample_loss(order[b0 + static_cast<std::size_t>(i)], grad);
      });
      nn::Gradients total = params.weights().zero_gradients();
      for (int i = 0; i < n; ++i) {
        nn::add_into(total, grads[static_cast<std::size_t>(i)]);
        epoch_loss += losses[static_cast<std::size_t>(i)];
      }
      nn::scale_gradients(total, 1.0 / n);
      if (options.adam) {
        adam.step(params.weights(), total);
      } else {
        sgd.step(params.weights(), total);
      }
      if (!params.weights().all_finite()) throw NaNLoss("motion weights diverged at epoch " + std::to_string(epoch));
    }
    const double mean = epoch_loss / static_cast<double>(samples.size());
    epoch_losses.push_back(mean);
    if (options.on_epoch) options.on_epoch(epoch, mean);
  }
  return epoch_losses;
}

std::vector<InstanceSet> history_frames(const Scenario& scenario, int t, int m) {
  if (t < 0 || t >= scenario.duration()) throw HorizonOverrun("history frame outside the scenario");
  std::vector<InstanceSet> out;
  for (int k = t; k >= std::max(0, t - m); --k) out.push_back(ego_frame_view(scenario, k).first);
  return out;
}

MotionSample motion_sample(const Scenario& scenario, int t, std::vector<InstanceSet> frames) {
  if (frames.empty()) throw ShapeMismatch("motion sample needs frames");
  MotionSample s;
  s.frames = std::move(frames);
  s.agent_futures = agent_futures_in_frame(scenario, t, kPlanningSteps);
  s.ego_future = scripted_condition(scenario, t).planned;
  for (const auto& a : s.frames.front().agents) s.agents_now.push_back(a.anchor);
  return s;
}

}  // namespace sparseworld
