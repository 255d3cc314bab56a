#include "sparseworld/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "sparseworld/alignment.hpp"
#include "sparseworld/errors.hpp"
#include "sparseworld/geometry.hpp"

namespace sparseworld {

std::string_view to_string(MotionModel m) noexcept {
  switch (m) {
    case MotionModel::kConstantVelocity: return "constant-velocity";
    case MotionModel::kConstantTurn: return "constant-turn";
    case MotionModel::kLaneFollow: return "lane-follow";
    case MotionModel::kStopAndGo: return "stop-and-go";
  }
  return "constant-velocity";
}

std::string_view to_string(EgoProfile p) noexcept {
  switch (p) {
    case EgoProfile::kStraight: return "straight";
    case EgoProfile::kCurveLeft: return "curve-left";
    case EgoProfile::kCurveRight: return "curve-right";
    case EgoProfile::kDecelerate: return "decelerate";
  }
  return "straight";
}

EgoProfile ego_profile_from_string(std::string_view s) {
  if (s == "straight") return EgoProfile::kStraight;
  if (s == "curve-left") return EgoProfile::kCurveLeft;
  if (s == "curve-right") return EgoProfile::kCurveRight;
  if (s == "decelerate") return EgoProfile::kDecelerate;
  throw ValidationError("unknown ego profile '" + std::string(s) + "'");
}

void ScenarioConfig::validate(const RolloutConfig& rollout) const {
  rollout.validate();
  if (n_agents < 0 || n_agents > agent_slots) throw ValidationError("n_agents must be in [0, agent_slots]");
  if (n_map_elements < 0 || n_map_elements > map_slots) {
    throw ValidationError("n_map_elements must be in [0, map_slots]");
  }
  if (n_crossing < 0 || n_crossing > n_agents) throw ValidationError("n_crossing must be in [0, n_agents]");
  if (!(dt > 0.0)) throw ValidationError("scenario dt must be positive");
  if (duration < rollout.history + rollout.forecast + kPlanningSteps) {
    throw ValidationError("duration must be >= h + f + T = " +
                          std::to_string(rollout.history + rollout.forecast + kPlanningSteps));
  }
  double total = 0.0;
  for (double w : motion_mix) {
    if (!(w >= 0.0)) throw ValidationError("motion_mix weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("motion_mix must sum to 1");
}

double StopAndGo::speed_for_interval(int interval, double dt) const noexcept {
  if (interval < stop_frame) return cruise;
  const int ramp = std::max(1, static_cast<int>(std::ceil(cruise / (decel * dt))));
  const int k = interval - stop_frame;
  if (k < ramp) return std::max(0.0, cruise - decel * dt * (k + 1));
  if (k < ramp + hold_frames) return 0.0;
  return std::min(cruise, decel * dt * (k - ramp - hold_frames + 1));
}

Vec2 EntityState::velocity() const noexcept {
  return {speed * std::cos(pose.yaw), speed * std::sin(pose.yaw)};
}

EntityState step_entity(const EntityState& state, double dt) noexcept {
  EntityState next = state;
  const EgoMotionStep arc = arc_step(state.speed, state.turn_rate, dt);
  next.pose = state.pose.compose(arc.pose());
  return next;
}

double pure_pursuit_turn_rate(const EntityState& state, const MapAnchor& lane) noexcept {
  const auto& pts = lane.points;
  if (pts.size() < 2) return 0.0;
  const Vec2 pos{state.pose.x, state.pose.y};
  // Closest point on the polyline, as (segment, fraction).
  std::size_t best_seg = 0;
  double best_frac = 0.0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 seg = pts[i + 1] - pts[i];
    const double len2 = seg.squaredNorm();
    const double frac = len2 > 0.0 ? std::clamp((pos - pts[i]).dot(seg) / len2, 0.0, 1.0) : 0.0;
    const double dist = (pts[i] + frac * seg - pos).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best_seg = i;
      best_frac = frac;
    }
  }
  const double lookahead = std::max(4.0, state.speed * 1.0);
  double remaining = lookahead;
  std::size_t seg = best_seg;
  Vec2 cursor = pts[seg] + best_frac * (pts[seg + 1] - pts[seg]);
  Vec2 target = cursor;
  while (true) {
    const Vec2 end = pts[seg + 1];
    const double left = (end - cursor).norm();
    if (left >= remaining) {
      target = cursor + (end - cursor) * (remaining / std::max(left, 1e-12));
      break;
    }
    remaining -= left;
    cursor = end;
    if (seg + 2 >= pts.size()) {
      const Vec2 dir = (pts.back() - pts[pts.size() - 2]).normalized();
      target = pts.back() + dir * remaining;
      break;
    }
    ++seg;
  }
  const Vec2 local = rotate2d(target - pos, -state.pose.yaw);
  const double d2 = local.squaredNorm();
  if (d2 < 1e-9) return 0.0;
  const double curvature = 2.0 * local.y() / d2;
  return std::clamp(state.speed * curvature, -1.0, 1.0);
}

namespace {

constexpr int kMaxSpawnAttempts = 1000;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::vector<Pose2D> integrate_ego(const ScenarioPlan& plan, int frames, double dt) {
  std::vector<Pose2D> track;
  track.reserve(static_cast<std::size_t>(frames));
  Pose2D pose = plan.ego_start;
  for (int i = 0; i < frames; ++i) {
    track.push_back(pose);
    if (i + 1 < frames) {
      pose = pose.compose(arc_step(plan.ego_speed[static_cast<std::size_t>(i)],
                                   plan.ego_omega[static_cast<std::size_t>(i)], dt)
                              .pose());
    }
  }
  return track;
}

OrientedBox2D entity_box(const EntityState& e) {
  OrientedBox2D box;
  box.center = {e.pose.x, e.pose.y};
  box.half_extents = {e.size.y() / 2.0, e.size.x() / 2.0};
  box.heading = Heading::from_angle(e.pose.yaw);
  return box;
}

OrientedBox2D ego_box(const Pose2D& pose, const Vec3& size) {
  OrientedBox2D box;
  box.center = {pose.x, pose.y};
  box.half_extents = {size.y() / 2.0, size.x() / 2.0};
  box.heading = Heading::from_angle(pose.yaw);
  return box;
}

// Controls for the interval starting at `frame`.
void update_controls(EntityState& e, const AgentScript& script, const std::vector<MapAnchor>& maps, int frame,
                     double dt) {
  if (e.model == MotionModel::kStopAndGo) {
    e.speed = script.stop_and_go.speed_for_interval(frame, dt);
  } else if (e.model == MotionModel::kLaneFollow && script.lane >= 0) {
    e.turn_rate = pure_pursuit_turn_rate(e, maps[static_cast<std::size_t>(script.lane)]);
  }
}

std::vector<EntityState> simulate_agent(const AgentScript& script, const std::vector<MapAnchor>& maps, int frames,
                                        double dt) {
  std::vector<EntityState> states;
  states.reserve(static_cast<std::size_t>(frames));
  EntityState e = script.initial;
  update_controls(e, script, maps, 0, dt);
  for (int i = 0; i < frames; ++i) {
    states.push_back(e);
    e = step_entity(e, dt);
    update_controls(e, script, maps, i + 1, dt);
  }
  return states;
}

std::vector<Vec2> polyline(const Vec2& start, double yaw, double radius_signed, double length) {
  std::vector<Vec2> pts;
  pts.reserve(kMapPoints);
  for (int k = 0; k < kMapPoints; ++k) {
    const double s = length * k / (kMapPoints - 1);
    Vec2 local;
    if (std::abs(radius_signed) < 1e-9) {
      local = {s, 0.0};
    } else {
      const double phi = s / radius_signed;
      local = {radius_signed * std::sin(phi), radius_signed * (1.0 - std::cos(phi))};
    }
    pts.push_back(start + rotate2d(local, yaw));
  }
  return pts;
}

std::vector<MapAnchor> sample_maps(const ScenarioConfig& config, Rng& rng) {
  std::vector<MapAnchor> maps;
  for (int k = 0; k < config.n_map_elements; ++k) {
    MapAnchor m;
    m.id = 1000 + k;
    m.existence = 1.0;
    const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    switch (k % 4) {
      case 0: {
        const double y = side * (1.75 + 3.5 * uniform_int(rng, 0, 1));
        m.class_label = MapClass::kLaneDivider;
        m.points = polyline({uniform(rng, -30.0, -10.0), y}, 0.0, 0.0, 120.0);
        break;
      }
      case 1: {
        const double y = side * (1.75 + 3.5 * uniform_int(rng, 0, 1));
        const double turn = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
        m.class_label = MapClass::kLaneDivider;
        m.points = polyline({uniform(rng, -10.0, 30.0), y}, 0.0, turn * uniform(rng, 30.0, 80.0), 100.0);
        break;
      }
      case 2: {
        m.class_label = MapClass::kBoundary;
        m.points = polyline({-30.0, side * uniform(rng, 7.0, 9.0)}, 0.0, 0.0, 120.0);
        break;
      }
      default: {
        m.class_label = MapClass::kCrossing;
        m.points = polyline({uniform(rng, 10.0, 60.0), -10.0}, kPi / 2.0, 0.0, 20.0);
        break;
      }
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

void sample_ego(const ScenarioConfig& config, ScenarioPlan& plan, Rng& rng) {
  const int intervals = config.duration + kPlanningSteps;
  const double v0 = uniform(rng, 5.0, 11.0);
  const int event = uniform_int(rng, 1, std::max(1, config.duration - 2));
  const double radius = uniform(rng, 25.0, 60.0);
  const double decel = uniform(rng, 1.0, 2.5);
  plan.ego_speed.assign(static_cast<std::size_t>(intervals), v0);
  plan.ego_omega.assign(static_cast<std::size_t>(intervals), 0.0);
  for (int i = event; i < intervals; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    switch (config.ego_profile) {
      case EgoProfile::kStraight: break;
      case EgoProfile::kCurveLeft: plan.ego_omega[idx] = v0 / radius; break;
      case EgoProfile::kCurveRight: plan.ego_omega[idx] = -v0 / radius; break;
      case EgoProfile::kDecelerate:
        plan.ego_speed[idx] = std::max(0.0, v0 - decel * config.dt * (i - event + 1));
        break;
    }
  }
}

struct ClassDraw {
  AgentClass label;
  Vec3 size;
  double speed;
};

ClassDraw draw_class(Rng& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  if (u < 0.7) {
    return {AgentClass::kVehicle, {uniform(rng, 1.7, 2.1), uniform(rng, 4.0, 5.0), 1.6}, uniform(rng, 3.0, 11.0)};
  }
  if (u < 0.85) return {AgentClass::kCyclist, {0.7, 1.8, 1.6}, uniform(rng, 2.0, 6.0)};
  return {AgentClass::kPedestrian, {0.6, 0.6, 1.8}, uniform(rng, 0.8, 2.0)};
}

MotionModel draw_model(const ScenarioConfig& config, Rng& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  for (int k = 0; k < kMotionModelCount; ++k) {
    acc += config.motion_mix[static_cast<std::size_t>(k)];
    if (u < acc) return static_cast<MotionModel>(k);
  }
  for (int k = kMotionModelCount - 1; k >= 0; --k) {
    if (config.motion_mix[static_cast<std::size_t>(k)] > 0.0) return static_cast<MotionModel>(k);
  }
  return MotionModel::kConstantVelocity;
}

bool clashes_with_ego(const std::vector<EntityState>& states, const std::vector<Pose2D>& ego_track,
                      const Vec3& ego_size, int frames) {
  for (int i = 0; i < frames; ++i) {
    if (boxes_overlap(entity_box(states[static_cast<std::size_t>(i)]),
                      ego_box(ego_track[static_cast<std::size_t>(i)], ego_size), 0.5)) {
      return true;
    }
  }
  return false;
}

AgentScript sample_regular_agent(const ScenarioConfig& config, const ScenarioPlan& plan, Rng& rng,
                                 std::int64_t id) {
  AgentScript script;
  const ClassDraw cls = draw_class(rng);
  EntityState& e = script.initial;
  e.id = id;
  e.class_label = cls.label;
  e.size = cls.size;
  e.model = draw_model(config, rng);
  e.speed = cls.speed;

  std::vector<int> lanes;
  for (std::size_t k = 0; k < plan.maps.size(); ++k) {
    if (plan.maps[k].class_label == MapClass::kLaneDivider) lanes.push_back(static_cast<int>(k));
  }
  if (e.model == MotionModel::kLaneFollow && lanes.empty()) e.model = MotionModel::kConstantVelocity;

  if (e.model == MotionModel::kLaneFollow) {
    script.lane = lanes[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(lanes.size()) - 1))];
    const auto& pts = plan.maps[static_cast<std::size_t>(script.lane)].points;
    const int seg = uniform_int(rng, 0, kMapPoints - 8);
    const double frac = uniform(rng, 0.0, 1.0);
    const Vec2 p = pts[static_cast<std::size_t>(seg)] +
                   frac * (pts[static_cast<std::size_t>(seg) + 1] - pts[static_cast<std::size_t>(seg)]);
    const Vec2 d = pts[static_cast<std::size_t>(seg) + 1] - pts[static_cast<std::size_t>(seg)];
    e.pose = {p.x(), p.y(), std::atan2(d.y(), d.x())};
  } else {
    const double base_yaw = uniform(rng, 0.0, 1.0) < 0.6 ? 0.0 : kPi;
    e.pose = {uniform(rng, -40.0, 60.0), uniform(rng, -25.0, 25.0), base_yaw + uniform(rng, -0.3, 0.3)};
  }
  if (e.model == MotionModel::kConstantTurn) {
    e.turn_rate = (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(rng, 0.1, 0.35);
  }
  if (e.model == MotionModel::kStopAndGo) {
    script.stop_and_go.cruise = std::max(e.speed, 2.0);
    script.stop_and_go.stop_frame = uniform_int(rng, 1, std::max(1, config.duration - 6));
    script.stop_and_go.decel = uniform(rng, 1.5, 3.0);
    script.stop_and_go.hold_frames = uniform_int(rng, 1, 4);
    e.speed = script.stop_and_go.speed_for_interval(0, config.dt);
  }
  return script;
}

AgentScript sample_crossing_agent(const ScenarioConfig& config, const std::vector<Pose2D>& ego_track, Rng& rng,
                                  std::int64_t id) {
  AgentScript script;
  const ClassDraw cls = draw_class(rng);
  EntityState& e = script.initial;
  e.id = id;
  e.class_label = cls.label;
  e.size = cls.size;
  e.model = MotionModel::kConstantVelocity;
  e.crossing = true;
  e.speed = cls.label == AgentClass::kVehicle ? uniform(rng, 4.0, 8.0) : cls.speed;

  const int cross_frame = uniform_int(rng, 3, config.duration - 2);
  const Pose2D& at = ego_track[static_cast<std::size_t>(cross_frame)];
  const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  const double yaw = at.yaw + side * kPi / 2.0 + uniform(rng, -0.35, 0.35);
  const double along = uniform(rng, -4.0, 4.0);
  const Vec2 meet = Vec2{at.x, at.y} + rotate2d(Vec2{along, 0.0}, at.yaw);
  const Vec2 start = meet - e.speed * cross_frame * config.dt * Vec2{std::cos(yaw), std::sin(yaw)};
  e.pose = {start.x(), start.y(), yaw};
  return script;
}

}  // namespace

ScenarioPlan sample_plan(const ScenarioConfig& config) {
  config.validate();
  Rng rng(config.seed);
  ScenarioPlan plan;
  sample_ego(config, plan, rng);
  plan.maps = sample_maps(config, rng);
  const std::vector<Pose2D> ego_track = integrate_ego(plan, config.duration, config.dt);

  for (int i = 0; i < config.n_agents; ++i) {
    const std::int64_t id = i + 1;
    const bool crossing = i < config.n_crossing;
    bool placed = false;
    for (int attempt = 0; attempt < kMaxSpawnAttempts && !placed; ++attempt) {
      AgentScript script = crossing ? sample_crossing_agent(config, ego_track, rng, id)
                                    : sample_regular_agent(config, plan, rng, id);
      const auto states = simulate_agent(script, plan.maps, config.duration, config.dt);
      // Crossing agents must only start clear of the ego; regular traffic stays clear throughout.
      const int checked = crossing ? 1 : config.duration;
      if (!clashes_with_ego(states, ego_track, plan.ego_size, checked)) {
        plan.agents.push_back(std::move(script));
        placed = true;
      }
    }
    if (!placed) {
      throw InfeasibleScenario("could not place agent " + std::to_string(id) + " after " +
                               std::to_string(kMaxSpawnAttempts) + " attempts");
    }
  }
  return plan;
}

Scenario simulate(const ScenarioConfig& config, const ScenarioPlan& plan) {
  const int extended = config.duration + kPlanningSteps;
  if (static_cast<int>(plan.ego_speed.size()) < extended || static_cast<int>(plan.ego_omega.size()) < extended) {
    throw ValidationError("ego controls must cover duration + T intervals");
  }
  Scenario scenario;
  scenario.config = config;
  scenario.plan = plan;
  scenario.ego_track = integrate_ego(plan, extended, config.dt);

  std::vector<std::vector<EntityState>> tracks;
  tracks.reserve(plan.agents.size());
  for (const auto& script : plan.agents) tracks.push_back(simulate_agent(script, plan.maps, config.duration, config.dt));

  scenario.frames.resize(static_cast<std::size_t>(config.duration));
  for (int i = 0; i < config.duration; ++i) {
    auto& ws = scenario.frames[static_cast<std::size_t>(i)];
    ws.frame = i;
    ws.ego_pose = scenario.ego_track[static_cast<std::size_t>(i)];
    ws.ego_speed = plan.ego_speed[static_cast<std::size_t>(i)];
    ws.ego_omega = plan.ego_omega[static_cast<std::size_t>(i)];
    ws.agents.reserve(tracks.size());
    for (const auto& track : tracks) ws.agents.push_back(track[static_cast<std::size_t>(i)]);
  }
  return scenario;
}

Scenario generate(const ScenarioConfig& config) { return simulate(config, sample_plan(config)); }

namespace {

AgentAnchor anchor_in_frame(const EntityState& e, const Pose2D& frame_from_world) {
  AgentAnchor a;
  a.id = e.id;
  const Vec2 c = frame_from_world.apply({e.pose.x, e.pose.y});
  a.center = {c.x(), c.y(), e.size.z() / 2.0};
  a.size = e.size;
  const Heading h = frame_from_world.heading_of(Heading::from_angle(e.pose.yaw));
  a.heading = normalize_heading(h.sin, h.cos);
  const Vec2 v = frame_from_world.rotate(e.velocity());
  a.velocity = {v.x(), v.y(), 0.0};
  a.class_label = e.class_label;
  a.existence = 1.0;
  return a;
}

void check_frame(const Scenario& scenario, int t) {
  if (t < 0 || t >= scenario.duration()) {
    throw HorizonOverrun("frame " + std::to_string(t) + " outside scenario of " +
                         std::to_string(scenario.duration()) + " frames");
  }
}

InstanceSet instances_at(const Scenario& scenario, int t) {
  const auto& ws = scenario.frames[static_cast<std::size_t>(t)];
  const Pose2D frame_from_world = ws.ego_pose.inverse();
  const auto& config = scenario.config;

  InstanceSet set;
  set.frame_index = t;
  set.ego.size = scenario.plan.ego_size;
  set.ego.center = {0.0, 0.0, scenario.plan.ego_size.z() / 2.0};
  set.ego.velocity = {ws.ego_speed, 0.0, 0.0};
  set.ego.angular_velocity = ws.ego_omega;

  set.agents.reserve(static_cast<std::size_t>(config.agent_slots));
  for (int i = 0; i < config.agent_slots; ++i) {
    if (i < static_cast<int>(ws.agents.size())) {
      set.agents.push_back({anchor_in_frame(ws.agents[static_cast<std::size_t>(i)], frame_from_world), {}});
    } else {
      set.agents.push_back(empty_agent_slot());
    }
  }
  set.maps.reserve(static_cast<std::size_t>(config.map_slots));
  for (int i = 0; i < config.map_slots; ++i) {
    if (i < static_cast<int>(scenario.plan.maps.size())) {
      MapInstance m{scenario.plan.maps[static_cast<std::size_t>(i)], {}};
      for (auto& p : m.anchor.points) p = frame_from_world.apply(p);
      set.maps.push_back(std::move(m));
    } else {
      set.maps.push_back(empty_map_slot());
    }
  }
  return set;
}

}  // namespace

ActionCondition scripted_condition(const Scenario& scenario, int t) {
  check_frame(scenario, t);
  const Pose2D frame_from_world = scenario.ego_track[static_cast<std::size_t>(t)].inverse();
  ActionCondition condition;
  condition.speed = scenario.frames[static_cast<std::size_t>(t)].ego_speed;
  condition.planned.dt = scenario.config.dt;
  for (int k = 1; k <= kPlanningSteps; ++k) {
    const Pose2D& p = scenario.ego_track[static_cast<std::size_t>(t + k)];
    condition.planned.waypoints.push_back(frame_from_world.apply({p.x, p.y}));
  }
  condition.steering = steering_from_curvature(mean_signed_curvature(condition.planned));
  return condition;
}

std::pair<InstanceSet, ActionCondition> ego_frame_view(const Scenario& scenario, int t) {
  check_frame(scenario, t);
  return {instances_at(scenario, t), scripted_condition(scenario, t)};
}

std::vector<InstanceSet> ground_truth_future(const Scenario& scenario, int t, int f) {
  if (t < 0 || f < 0 || t + f >= scenario.duration()) {
    throw HorizonOverrun("ground truth future t=" + std::to_string(t) + ", f=" + std::to_string(f) +
                         " overruns " + std::to_string(scenario.duration()) + " frames");
  }
  std::vector<InstanceSet> out;
  out.reserve(static_cast<std::size_t>(f));
  for (int k = 1; k <= f; ++k) out.push_back(instances_at(scenario, t + k));
  return out;
}

std::vector<AgentAnchor> agents_at_in_frame(const Scenario& scenario, int t, int k) {
  check_frame(scenario, t);
  check_frame(scenario, t + k);
  const Pose2D frame_from_world = scenario.ego_track[static_cast<std::size_t>(t)].inverse();
  const auto& ws = scenario.frames[static_cast<std::size_t>(t + k)];
  std::vector<AgentAnchor> out;
  out.reserve(ws.agents.size());
  for (const auto& e : ws.agents) out.push_back(anchor_in_frame(e, frame_from_world));
  return out;
}

std::vector<Trajectory> agent_futures_in_frame(const Scenario& scenario, int t, int steps) {
  if (t < 0 || t + steps >= scenario.duration()) {
    throw HorizonOverrun("agent futures overrun the scenario at t=" + std::to_string(t));
  }
  const Pose2D frame_from_world = scenario.ego_track[static_cast<std::size_t>(t)].inverse();
  std::vector<Trajectory> out(static_cast<std::size_t>(scenario.config.agent_slots));
  for (auto& traj : out) {
    traj.dt = scenario.config.dt;
    traj.waypoints.assign(static_cast<std::size_t>(steps), Vec2::Zero());
  }
  for (int k = 1; k <= steps; ++k) {
    const auto& ws = scenario.frames[static_cast<std::size_t>(t + k)];
    for (std::size_t i = 0; i < ws.agents.size(); ++i) {
      const auto& e = ws.agents[i];
      out[i].waypoints[static_cast<std::size_t>(k - 1)] = frame_from_world.apply({e.pose.x, e.pose.y});
    }
  }
  return out;
}

}  // namespace sparseworld
