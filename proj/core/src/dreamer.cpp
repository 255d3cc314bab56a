#include "sparseworld/dreamer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "sparseworld/errors.hpp"

namespace sparseworld {

using nn::Graph;
using nn::Mask;
using nn::Matrix;
using nn::Var;

namespace {

constexpr double kPositionScale = 20.0;
constexpr double kVelocityScale = 10.0;
constexpr double kSpeedScale = 15.0;
constexpr double kPlanScale = 40.0;
constexpr double kSmoothL1Beta = 0.2;
constexpr double kRegressionWeight = 1.0;
constexpr double kExistenceWeight = 0.2;

}  // namespace

void DreamerConfig::validate() const {
  if (blocks < 1) throw ValidationError("dreamer needs at least one block");
  if (heads < 1 || width < heads || width % heads != 0) throw ValidationError("width must be a multiple of heads");
  if (window < 1) throw ValidationError("dreamer window must be >= 1");
  if (n_freq < 1) throw ValidationError("n_freq must be >= 1");
  if (planning_steps < 1) throw ValidationError("planning_steps must be >= 1");
  if (map_points < 2) throw ValidationError("map_points must be >= 2");
}

DreamerParams::DreamerParams(const DreamerConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const Eigen::Index c = config_.width;
  auto& ps = weights_;
  agent_embed = nn::Linear::create(ps, "embed.agent", kAgentInputWidth, c, rng);
  map_embed = nn::Linear::create(ps, "embed.map", 2 * config_.map_points + kMapClassCount, c, rng);
  condition_embed = nn::Linear::create(ps, "embed.condition", 2 * config_.n_freq, c, rng);
  pos_embed = nn::Linear::create(ps, "embed.pos", 2 * config_.n_freq * 3, c, rng);
  condition_token_table = ps.add_xavier("embed.condition_tokens", condition_tokens(), c, rng);
  time_table = ps.add_xavier("embed.time", config_.window + 1, c, rng);
  for (int b = 0; b < config_.blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    Block blk;
    blk.ln_self = nn::LayerNorm::create(ps, p + ".ln_self", c);
    blk.self_attn = nn::MultiHeadAttention::create(ps, p + ".self", c, config_.heads, rng);
    blk.ln_temporal = nn::LayerNorm::create(ps, p + ".ln_temporal", c);
    blk.temporal_attn = nn::MultiHeadAttention::create(ps, p + ".temporal", c, config_.heads, rng);
    blk.ln_action = nn::LayerNorm::create(ps, p + ".ln_action", c);
    blk.action_attn = nn::MultiHeadAttention::create(ps, p + ".action", c, config_.heads, rng);
    blk.has_preproj = b > 0;
    if (blk.has_preproj) {
      blk.ln_preproj = nn::LayerNorm::create(ps, p + ".ln_preproj", c);
      blk.preproj_attn = nn::MultiHeadAttention::create(ps, p + ".preproj", c, config_.heads, rng);
    }
    blk.ln_ffn = nn::LayerNorm::create(ps, p + ".ln_ffn", c);
    blk.ffn = nn::FeedForward::create(ps, p + ".ffn", c, 4 * c, rng);
    blocks.push_back(blk);
  }
  ln_out = nn::LayerNorm::create(ps, "head.ln", c);
  agent_head = nn::Linear::zeros(ps, "head.agent", c, kAgentResidualWidth);
  map_head = nn::Linear::zeros(ps, "head.map", c, 2 * config_.map_points);
  existence_head = nn::Linear::zeros(ps, "head.existence", c, 1);
}

void DreamerParams::zero_heads() {
  for (std::size_t i : {agent_head.weight, agent_head.bias, map_head.weight, map_head.bias, existence_head.weight,
                        existence_head.bias}) {
    weights_.value(i).setZero();
  }
}

void to_json(nlohmann::json& j, const DreamerConfig& c) {
  j = {{"blocks", c.blocks},     {"heads", c.heads},
       {"width", c.width},       {"window", c.window},
       {"n_freq", c.n_freq},     {"planning_steps", c.planning_steps},
       {"map_points", c.map_points}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DreamerConfig& c) {
  j.at("blocks").get_to(c.blocks);
  j.at("heads").get_to(c.heads);
  j.at("width").get_to(c.width);
  j.at("window").get_to(c.window);
  j.at("n_freq").get_to(c.n_freq);
  j.at("planning_steps").get_to(c.planning_steps);
  j.at("map_points").get_to(c.map_points);
  j.at("seed").get_to(c.seed);
}

void to_json(nlohmann::json& j, const DreamerParams& p) {
  j = {{"config", p.config()}, {"weights", p.weights()}};
}

DreamerParams dreamer_from_json(const nlohmann::json& j) {
  DreamerParams p(j.at("config").get<DreamerConfig>());
  p.weights().load_values(nn::parameters_from_json(j.at("weights")));
  if (!p.weights().all_finite()) throw ValidationError("dreamer checkpoint contains non-finite weights");
  return p;
}

Eigen::VectorXd condition_vector(const ActionCondition& condition, int planning_steps) {
  if (static_cast<int>(condition.planned.waypoints.size()) != planning_steps) {
    throw ShapeMismatch("planned trajectory has " + std::to_string(condition.planned.waypoints.size()) +
                        " waypoints, expected " + std::to_string(planning_steps));
  }
  Eigen::VectorXd v(1 + 2 * planning_steps + kSteeringCount);
  v[0] = condition.speed / kSpeedScale;
  for (int k = 0; k < planning_steps; ++k) {
    v[1 + 2 * k] = condition.planned.waypoints[static_cast<std::size_t>(k)].x() / kPlanScale;
    v[2 + 2 * k] = condition.planned.waypoints[static_cast<std::size_t>(k)].y() / kPlanScale;
  }
  for (int s = 0; s < kSteeringCount; ++s) {
    v[1 + 2 * planning_steps + s] = static_cast<int>(condition.steering) == s ? 1.0 : 0.0;
  }
  return v;
}

Eigen::VectorXd fourier_embed(const ActionCondition& condition, int n_freq, int planning_steps) {
  if (n_freq < 1) throw ValidationError("n_freq must be >= 1");
  const Eigen::VectorXd v = condition_vector(condition, planning_steps);
  const Matrix f = nn::fourier_features(v.transpose(), n_freq);
  return f.row(0).transpose();
}

Eigen::VectorXd agent_input(const AgentAnchor& a) {
  Eigen::VectorXd v(kAgentInputWidth);
  v << a.center.x() / kPositionScale, a.center.y() / kPositionScale, a.center.z(), a.size.x() / 2.0,
      a.size.y() / 5.0, a.size.z() / 2.0, a.heading.sin, a.heading.cos, a.velocity.x() / kVelocityScale,
      a.velocity.y() / kVelocityScale, a.velocity.z(), 0.0, 0.0, 0.0;
  v[11 + static_cast<int>(a.class_label)] = 1.0;
  return v;
}

Eigen::VectorXd map_input(const MapAnchor& a) {
  const auto n = static_cast<Eigen::Index>(a.points.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * n + kMapClassCount);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[2 * i] = a.points[static_cast<std::size_t>(i)].x() / kPositionScale;
    v[2 * i + 1] = a.points[static_cast<std::size_t>(i)].y() / kPositionScale;
  }
  v[2 * n + static_cast<int>(a.class_label)] = 1.0;
  return v;
}

namespace {

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

// Slot embeddings of a frame, agents first then maps.
Var embed_frame(Graph& g, const DreamerParams& p, const InstanceSet& frame) {
  std::vector<Var> parts;
  if (!frame.agents.empty()) parts.push_back(g.gelu(p.agent_embed(g, g.constant(agent_rows(frame.agents)))));
  if (!frame.maps.empty()) {
    parts.push_back(g.gelu(p.map_embed(g, g.constant(map_rows(frame.maps, p.config().map_points)))));
  }
  return g.concat_rows(parts);
}

bool has_features(const InstanceSet& frame, int width) {
  auto ok = [width](const InstanceFeature& f) { return f.size() == width; };
  return std::all_of(frame.agents.begin(), frame.agents.end(), [&](const auto& a) { return ok(a.feature); }) &&
         std::all_of(frame.maps.begin(), frame.maps.end(), [&](const auto& m) { return ok(m.feature); });
}

// Stored features when every slot has one; otherwise the frame is treated
// as observed and encoded from its anchors.
Var frame_features(Graph& g, const DreamerParams& p, const InstanceSet& frame) {
  const int c = p.config().width;
  if (!has_features(frame, c)) return embed_frame(g, p, frame);
  Matrix f(static_cast<Eigen::Index>(frame.agents.size() + frame.maps.size()), c);
  Eigen::Index r = 0;
  for (const auto& a : frame.agents) f.row(r++) = a.feature.transpose();
  for (const auto& m : frame.maps) f.row(r++) = m.feature.transpose();
  return g.constant(std::move(f));
}

std::vector<bool> active_slots(const InstanceSet& frame) {
  std::vector<bool> out;
  out.reserve(frame.agents.size() + frame.maps.size());
  for (const auto& a : frame.agents) out.push_back(slot_active(a.anchor));
  for (const auto& m : frame.maps) out.push_back(slot_active(m.anchor));
  return out;
}

void check_alignment(const DecoderInput& in) {
  if (in.window.empty()) throw ShapeMismatch("decoder window is empty");
  const auto& newest = in.window.back();
  for (const auto& f : in.window) {
    if (f.agents.size() != newest.agents.size() || f.maps.size() != newest.maps.size()) {
      throw ShapeMismatch("window frames disagree on slot counts");
    }
  }
  if (in.projected.agents.size() != newest.agents.size() || in.projected.maps.size() != newest.maps.size()) {
    throw ShapeMismatch("projected frame slot counts differ from the window");
  }
  for (std::size_t i = 0; i < newest.agents.size(); ++i) {
    if (in.projected.agents[i].anchor.id != newest.agents[i].anchor.id) {
      throw ShapeMismatch("projected agent slot " + std::to_string(i) + " holds a different instance");
    }
  }
  for (std::size_t i = 0; i < newest.maps.size(); ++i) {
    if (in.projected.maps[i].anchor.id != newest.maps[i].anchor.id) {
      throw ShapeMismatch("projected map slot " + std::to_string(i) + " holds a different instance");
    }
  }
}

struct Forward {
  Var agent_delta;  // A x 8
  Var map_delta;    // M x 2P
  Var logits;       // (A + M) x 1
  Var hidden;       // (A + M) x c
  Eigen::Index agents{0};
  Eigen::Index maps{0};
};

Forward forward(Graph& g, const DreamerParams& p, const DecoderInput& in, const DreamerSwitches& sw) {
  check_alignment(in);
  const auto& cfg = p.config();
  const int m = static_cast<int>(in.window.size()) - 1;
  if (m > cfg.window) throw ShapeMismatch("window longer than the configured m");
  const InstanceSet& newest = in.window.back();
  const auto n_agents = static_cast<Eigen::Index>(newest.agents.size());
  const auto n_maps = static_cast<Eigen::Index>(newest.maps.size());
  const Eigen::Index n = n_agents + n_maps;
  const int group = m + 1;
  const double dt = in.condition.planned.dt;

  // Pose of every window frame inside the newest frame.
  std::vector<Pose2D> in_newest(in.window.size());
  for (int j = m - 1; j >= 0; --j) {
    const EgoMotionStep step = frame_step(in.window[static_cast<std::size_t>(j)].ego, dt);
    in_newest[static_cast<std::size_t>(j)] = in_newest[static_cast<std::size_t>(j) + 1].compose(step.pose().inverse());
  }

  // Temporal memory, built age-major then regrouped slot-major.
  std::vector<Var> ages;
  Mask temporal_mask(n, group);
  for (int k = 0; k <= m; ++k) {
    const auto j = static_cast<std::size_t>(m - k);
    const InstanceSet& frame = in.window[j];
    Var mem = frame_features(g, p, frame);
    mem = g.add_row(mem, g.slice_rows(g.param(p.time_table), k, 1));
    if (sw.use_pe) {
      const Pose2D& rel = in_newest[j];
      Matrix d(1, 3);
      d << rel.x / kPositionScale, rel.y / kPositionScale, rel.yaw;
      mem = g.add_row(mem, p.pos_embed(g, g.constant(nn::fourier_features(d, cfg.n_freq))));
      mem = g.add(mem, embed_frame(g, p, transform_instances(frame, rel)));
    }
    const auto act = active_slots(frame);
    for (Eigen::Index i = 0; i < n; ++i) temporal_mask(i, k) = act[static_cast<std::size_t>(i)];
    ages.push_back(mem);
  }
  std::vector<int> regroup(static_cast<std::size_t>(n * group));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < group; ++k) regroup[static_cast<std::size_t>(i * group + k)] = static_cast<int>(k * n + i);
  }
  const Var temporal_memory = g.gather_rows(g.concat_rows(ages), regroup);

  // Action tokens.
  const Eigen::VectorXd cv = condition_vector(in.condition, cfg.planning_steps);
  const Var action_tokens = g.add(p.condition_embed(g, g.constant(nn::fourier_features(cv, cfg.n_freq))),
                                  g.param(p.condition_token_table));
  const Mask action_mask = Mask::Constant(n, g.rows(action_tokens), true);

  // Projected anchors.
  const Var projected = embed_frame(g, p, in.projected);
  const auto proj_active = active_slots(in.projected);
  Mask slot_mask(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) slot_mask(i, j) = proj_active[static_cast<std::size_t>(j)];
  }

  Var x = frame_features(g, p, newest);
  if (sw.use_pp) x = g.add(x, projected);

  for (const auto& blk : p.blocks) {
    Var h = blk.ln_self(g, x);
    x = g.add(x, blk.self_attn(g, h, h, slot_mask));
    x = g.add(x, blk.temporal_attn.grouped(g, blk.ln_temporal(g, x), temporal_memory, temporal_mask, group));
    x = g.add(x, blk.action_attn(g, blk.ln_action(g, x), action_tokens, action_mask));
    if (blk.has_preproj && sw.use_pp) {
      x = g.add(x, blk.preproj_attn(g, blk.ln_preproj(g, x), projected, slot_mask));
    }
    x = g.add(x, blk.ffn(g, blk.ln_ffn(g, x)));
  }

  Forward out;
  out.hidden = p.ln_out(g, x);
  out.agents = n_agents;
  out.maps = n_maps;
  if (n_agents > 0) out.agent_delta = p.agent_head(g, g.slice_rows(out.hidden, 0, n_agents));
  if (n_maps > 0) out.map_delta = p.map_head(g, g.slice_rows(out.hidden, n_agents, n_maps));
  out.logits = p.existence_head(g, out.hidden);
  return out;
}

InstanceSet assemble(const Graph& g, const Forward& fw, const DecoderInput& in, const DreamerSwitches& sw) {
  InstanceSet out = in.projected;
  const Matrix& hidden = g.value(fw.hidden);
  const Matrix& logits = g.value(fw.logits);
  for (Eigen::Index i = 0; i < fw.agents; ++i) {
    auto& slot = out.agents[static_cast<std::size_t>(i)];
    slot.feature = hidden.row(i).transpose();
    slot.anchor.existence = 1.0 / (1.0 + std::exp(-logits(i, 0)));
    if (!sw.refine_agents || slot.anchor.id == kEmptySlot) continue;
    const auto d = g.value(fw.agent_delta).row(i);
    auto& a = slot.anchor;
    a.center += Vec3{d[0], d[1], d[2]};
    const double s = a.heading.sin + d[3];
    const double c = a.heading.cos + d[4];
    if (std::hypot(s, c) >= 1e-12) a.heading = normalize_heading(s, c);
    a.velocity += Vec3{d[5], d[6], d[7]};
  }
  for (Eigen::Index i = 0; i < fw.maps; ++i) {
    auto& slot = out.maps[static_cast<std::size_t>(i)];
    slot.feature = hidden.row(fw.agents + i).transpose();
    slot.anchor.existence = 1.0 / (1.0 + std::exp(-logits(fw.agents + i, 0)));
    if (!sw.refine_maps || slot.anchor.id == kEmptySlot) continue;
    const auto d = g.value(fw.map_delta).row(i);
    auto& pts = slot.anchor.points;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      pts[k] += Vec2{d[static_cast<Eigen::Index>(2 * k)], d[static_cast<Eigen::Index>(2 * k + 1)]};
    }
  }
  return out;
}

struct LossVars {
  Var total;
  LossBreakdown values;
};

LossVars loss_graph(Graph& g, const Forward& fw, const DecoderInput& in, const InstanceSet& target) {
  if (target.agents.size() != in.projected.agents.size() || target.maps.size() != in.projected.maps.size()) {
    throw ShapeMismatch("target slot counts differ from the prediction");
  }
  const Eigen::Index A = fw.agents;
  const Eigen::Index M = fw.maps;
  std::vector<Var> terms;

  Var reg_total;
  if (A > 0) {
    Matrix proj_center(A, 3), proj_heading(A, 2), proj_vel(A, 3), tgt(A, kAgentResidualWidth);
    Matrix w = Matrix::Zero(A, kAgentResidualWidth);
    int exist = 0;
    for (Eigen::Index i = 0; i < A; ++i) {
      const auto& pa = in.projected.agents[static_cast<std::size_t>(i)].anchor;
      const auto& ta = target.agents[static_cast<std::size_t>(i)].anchor;
      proj_center.row(i) = pa.center.transpose();
      proj_heading.row(i) << pa.heading.sin, pa.heading.cos;
      proj_vel.row(i) = pa.velocity.transpose();
      tgt.row(i) << ta.center.x(), ta.center.y(), ta.center.z(), ta.heading.sin, ta.heading.cos, ta.velocity.x(),
          ta.velocity.y(), ta.velocity.z();
      if (slot_active(ta) && pa.id == ta.id) {
        w.row(i).setOnes();
        ++exist;
      }
    }
    if (exist > 0) {
      w /= static_cast<double>(exist);
      const Var d = fw.agent_delta;
      const Var center = g.add(g.constant(proj_center), g.slice_cols(d, 0, 3));
      const Var heading = g.normalize_rows(g.add(g.constant(proj_heading), g.slice_cols(d, 3, 2)));
      const Var vel = g.add(g.constant(proj_vel), g.slice_cols(d, 5, 3));
      const std::vector<Var> cols{center, heading, vel};
      terms.push_back(g.smooth_l1(g.concat_cols(cols), tgt, w, kSmoothL1Beta));
    }
  }
  if (M > 0) {
    const int P = static_cast<int>(in.projected.maps.front().anchor.points.size());
    Matrix proj(M, 2 * P), tgt(M, 2 * P);
    Matrix w = Matrix::Zero(M, 2 * P);
    int exist = 0;
    for (Eigen::Index i = 0; i < M; ++i) {
      const auto& pm = in.projected.maps[static_cast<std::size_t>(i)].anchor;
      const auto& tm = target.maps[static_cast<std::size_t>(i)].anchor;
      if (static_cast<int>(pm.points.size()) != P || static_cast<int>(tm.points.size()) != P) {
        throw ShapeMismatch("map polylines differ in point count");
      }
      for (int k = 0; k < P; ++k) {
        proj(i, 2 * k) = pm.points[static_cast<std::size_t>(k)].x();
        proj(i, 2 * k + 1) = pm.points[static_cast<std::size_t>(k)].y();
        tgt(i, 2 * k) = tm.points[static_cast<std::size_t>(k)].x();
        tgt(i, 2 * k + 1) = tm.points[static_cast<std::size_t>(k)].y();
      }
      if (slot_active(tm) && pm.id == tm.id) {
        w.row(i).setOnes();
        ++exist;
      }
    }
    if (exist > 0) {
      w /= static_cast<double>(exist) * P;
      terms.push_back(g.smooth_l1(g.add(g.constant(proj), fw.map_delta), tgt, w, kSmoothL1Beta));
    }
  }

  LossVars out;
  double reg_value = 0.0;
  if (!terms.empty()) {
    reg_total = terms.size() == 1 ? terms[0] : g.add(terms[0], terms[1]);
    reg_value = g.scalar(reg_total);
  }

  const Eigen::Index n = A + M;
  Matrix exist_target(n, 1);
  for (Eigen::Index i = 0; i < A; ++i) exist_target(i, 0) = slot_active(target.agents[static_cast<std::size_t>(i)].anchor);
  for (Eigen::Index i = 0; i < M; ++i) exist_target(A + i, 0) = slot_active(target.maps[static_cast<std::size_t>(i)].anchor);
  const Var bce = g.bce_with_logits(fw.logits, exist_target, Matrix::Constant(n, 1, 1.0 / static_cast<double>(n)));

  Var total = g.scale(bce, kExistenceWeight);
  if (reg_total.valid()) total = g.add(g.scale(reg_total, kRegressionWeight), total);
  out.total = total;
  out.values = {g.scalar(total), reg_value, g.scalar(bce)};
  if (!std::isfinite(out.values.total)) {
    throw NaNLoss("dreamer loss is not finite (regression " + std::to_string(reg_value) + ", existence " +
                  std::to_string(out.values.existence) + ")");
  }
  return out;
}

}  // namespace

InstanceFeature embed_anchor(const AgentAnchor& anchor, const DreamerParams& params) {
  Graph g(&params.weights(), false);
  Matrix row = agent_input(anchor).transpose();
  return g.value(g.gelu(params.agent_embed(g, g.constant(std::move(row))))).row(0).transpose();
}

InstanceFeature embed_anchor(const MapAnchor& anchor, const DreamerParams& params) {
  if (static_cast<int>(anchor.points.size()) != params.config().map_points) {
    throw ShapeMismatch("map anchor point count does not match the model");
  }
  Graph g(&params.weights(), false);
  Matrix row = map_input(anchor).transpose();
  return g.value(g.gelu(params.map_embed(g, g.constant(std::move(row))))).row(0).transpose();
}

double omega_from_plan(const ActionCondition& condition, double fallback) {
  if (condition.planned.waypoints.empty() || !(condition.planned.dt > 0.0)) return fallback;
  const Vec2& p = condition.planned.waypoints.front();
  if (p.norm() < 1e-6) return fallback;
  // A chord angle beyond 45 degrees means the plan points sideways or
  // backwards; cap the turn instead of spinning the ego frame around.
  const double chord = std::clamp(std::atan2(p.y(), p.x()), -kPi / 4.0, kPi / 4.0);
  return 2.0 * chord / condition.planned.dt;
}

EgoMotionStep frame_step(const EgoAnchor& ego, double dt) noexcept {
  return arc_step(ego.velocity.x(), ego.angular_velocity, dt);
}

InstanceSet decoder_step(const DecoderInput& input, const DreamerParams& params, const DreamerSwitches& switches) {
  Graph g(&params.weights(), false);
  const Forward fw = forward(g, params, input, switches);
  return assemble(g, fw, input, switches);
}

LossBreakdown dreamer_loss(const TrainSample& sample, const DreamerParams& params) {
  Graph g(&params.weights(), false);
  const Forward fw = forward(g, params, sample.input, {});
  return loss_graph(g, fw, sample.input, sample.target).values;
}

namespace {

// Loss and gradient of one sample, plus the decoded frame.
LossBreakdown sample_gradient(const TrainSample& sample, const DreamerParams& params, nn::Gradients& grad,
                              InstanceSet* decoded) {
  Graph g(&params.weights(), true);
  const Forward fw = forward(g, params, sample.input, {});
  const LossVars lv = loss_graph(g, fw, sample.input, sample.target);
  g.backward(lv.total);
  g.accumulate_param_grads(grad);
  if (decoded != nullptr) *decoded = assemble(g, fw, sample.input, {});
  return lv.values;
}

}  // namespace

StepResult train_step(const std::vector<TrainSample>& batch, const DreamerParams& params) {
  if (batch.empty()) throw ValidationError("train_step needs a non-empty batch");
  StepResult out;
  out.gradient = params.weights().zero_gradients();
  for (const auto& s : batch) {
    const LossBreakdown l = sample_gradient(s, params, out.gradient, nullptr);
    out.loss.total += l.total;
    out.loss.regression += l.regression;
    out.loss.existence += l.existence;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  nn::scale_gradients(out.gradient, inv);
  out.loss.total *= inv;
  out.loss.regression *= inv;
  out.loss.existence *= inv;
  return out;
}

ActionCondition OraclePlanner::plan(const InstanceMemoryQueue& /*queue*/, std::int64_t t) {
  return scripted_condition(scenario_, static_cast<int>(t));
}

namespace {

// Brings the ego anchor of a predicted frame in line with the planner's
// decision and returns the step to the next frame.
EgoMotionStep prepare_step(InstanceMemoryQueue& queue, std::int64_t t, const ActionCondition& condition,
                           bool predicted, double dt) {
  if (predicted) {
    EgoAnchor ego = queue.at(t).ego;
    ego.velocity = {condition.speed, 0.0, 0.0};
    ego.angular_velocity = omega_from_plan(condition, ego.angular_velocity);
    queue.set_ego(t, ego);
  }
  return step_from_condition(queue.at(t).ego, condition, dt);
}

// Predicted frames get their ego anchor from the planner only once the
// next step is planned; copy those updates into the returned frames.
void refresh_egos(const InstanceMemoryQueue& queue, std::int64_t t0, RolloutResult& out) {
  for (std::size_t k = 0; k < out.frames.size(); ++k) {
    out.frames[k].ego = queue.at(t0 + static_cast<std::int64_t>(k) + 1).ego;
  }
}

}  // namespace

RolloutResult rollout(InstanceMemoryQueue& queue, const RolloutConfig& config, const DreamerParams& params,
                      Planner& planner, const DreamerSwitches& switches) {
  config.validate();
  const std::int64_t t0 = queue.newest_index();
  const int m = std::min(config.window, params.config().window);
  RolloutResult out;
  for (int k = 0; k < config.forecast; ++k) {
    const std::int64_t t = t0 + k;
    ActionCondition condition = planner.plan(queue, t);
    const EgoMotionStep step = prepare_step(queue, t, condition, k > 0, config.dt);
    DecoderInput in{queue.window(t, m), project_instances(queue.at(t), step), condition};
    InstanceSet next = decoder_step(in, params, switches);
    queue.push(next);
    out.frames.push_back(std::move(next));
    out.conditions.push_back(std::move(condition));
    out.steps.push_back(step);
  }
  refresh_egos(queue, t0, out);
  return out;
}

RolloutResult projection_rollout(InstanceMemoryQueue& queue, const RolloutConfig& config, Planner& planner) {
  config.validate();
  const std::int64_t t0 = queue.newest_index();
  RolloutResult out;
  for (int k = 0; k < config.forecast; ++k) {
    const std::int64_t t = t0 + k;
    ActionCondition condition = planner.plan(queue, t);
    const EgoMotionStep step = prepare_step(queue, t, condition, k > 0, config.dt);
    InstanceSet next = project_instances(queue.at(t), step);
    queue.push(next);
    out.frames.push_back(std::move(next));
    out.conditions.push_back(std::move(condition));
    out.steps.push_back(step);
  }
  refresh_egos(queue, t0, out);
  return out;
}

InstanceMemoryQueue observed_queue(const Scenario& scenario, int t0, const RolloutConfig& config, int* padded) {
  config.validate();
  if (t0 < 0 || t0 >= scenario.duration()) throw HorizonOverrun("rollout start outside the scenario");
  std::vector<InstanceSet> history;
  for (int t = std::max(0, t0 - config.history); t <= t0; ++t) history.push_back(ego_frame_view(scenario, t).first);
  InstanceMemoryQueue queue(static_cast<std::size_t>(std::max(config.history, config.window) + config.forecast + 1));
  const int pad = fill_with_padding(queue, history, config.window);
  if (padded != nullptr) *padded = pad;
  return queue;
}

TrainSummary train_dreamer(DreamerParams& params, const std::vector<Scenario>& scenarios, const RolloutConfig& config,
                           const DreamerTrainOptions& options) {
  config.validate();
  if (scenarios.empty()) throw ValidationError("no training scenarios");
  std::mt19937_64 rng(options.seed);
  nn::SgdMomentum sgd(options.learning_rate, options.momentum);
  nn::Adam adam(options.learning_rate);
  const int m = std::min(config.window, params.config().window);
  TrainSummary summary;

  struct Start {
    int scenario;
    int t0;
  };
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::vector<Start> starts;
    for (int s = 0; s < static_cast<int>(scenarios.size()); ++s) {
      const int lo = std::min(config.history, scenarios[static_cast<std::size_t>(s)].duration() - 1);
      const int hi = scenarios[static_cast<std::size_t>(s)].duration() - 1 - config.forecast;
      if (hi < lo) continue;
      for (int r = 0; r < options.starts_per_scenario; ++r) {
        starts.push_back({s, std::uniform_int_distribution<int>(lo, hi)(rng)});
      }
    }
    std::shuffle(starts.begin(), starts.end(), rng);
    const double lr = nn::cosine_learning_rate(options.learning_rate, options.final_learning_rate, epoch, options.epochs);
    sgd.set_learning_rate(lr);
    adam.set_learning_rate(lr);

    double epoch_loss = 0.0;
    long epoch_terms = 0;
    for (std::size_t b0 = 0; b0 < starts.size(); b0 += static_cast<std::size_t>(options.batch_size)) {
      const int n = static_cast<int>(std::min(starts.size() - b0, static_cast<std::size_t>(options.batch_size)));
      std::vector<nn::Gradients> grads(static_cast<std::size_t>(n));
      std::vector<double> losses(static_cast<std::size_t>(n), 0.0);
      detail::parallel_for(n, options.jobs, [&](int i) {
        const Start st = starts[b0 + static_cast<std::size_t>(i)];
        const Scenario& sc = scenarios[static_cast<std::size_t>(st.scenario)];
        auto& grad = grads[static_cast<std::size_t>(i)];
        grad = params.weights().zero_gradients();
        InstanceMemoryQueue queue = observed_queue(sc, st.t0, config);
        const auto targets = ground_truth_future(sc, st.t0, config.forecast);
        OraclePlanner planner(sc);
        for (int k = 0; k < config.forecast; ++k) {
          const std::int64_t t = st.t0 + k;
          const ActionCondition condition = planner.plan(queue, t);
          const EgoMotionStep step = prepare_step(queue, t, condition, k > 0, config.dt);
          TrainSample sample{{queue.window(t, m), project_instances(queue.at(t), step), condition},
                             targets[static_cast<std::size_t>(k)]};
          InstanceSet decoded;
          losses[static_cast<std::size_t>(i)] += sample_gradient(sample, params, grad, &decoded).total;
          queue.push(std::move(decoded));
        }
      });
      nn::Gradients total = params.weights().zero_gradients();
      for (int i = 0; i < n; ++i) {
        nn::add_into(total, grads[static_cast<std::size_t>(i)]);
        epoch_loss += losses[static_cast<std::size_t>(i)];
      }
      epoch_terms += static_cast<long>(n) * config.forecast;
      nn::scale_gradients(total, 1.0 / (static_cast<double>(n) * config.forecast));
      if (options.adam) {
        adam.step(params.weights(), total);
      } else {
        sgd.step(params.weights(), total);
      }
      ++summary.steps;
      if (!params.weights().all_finite()) throw NaNLoss("dreamer weights diverged at epoch " + std::to_string(epoch));
    }
    const double mean = epoch_terms > 0 ? epoch_loss / static_cast<double>(epoch_terms) : 0.0;
    summary.epoch_loss.push_back(mean);
    if (options.on_epoch) options.on_epoch(epoch, mean);
  }
  return summary;
}

}  // namespace sparseworld
