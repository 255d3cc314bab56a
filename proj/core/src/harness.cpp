#include "sparseworld/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "parallel.hpp"
#include "sparseworld/alignment.hpp"
#include "sparseworld/errors.hpp"
#include "sparseworld/geometry.hpp"
#include "sparseworld/serialize.hpp"

namespace sparseworld {

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr std::array<double, 3> kPlanHorizons{1.0, 2.0, 3.0};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

nlohmann::json meta(const RunConfig& config, const std::string& command, Clock::time_point started) {
  return {{"command", command},
          {"version", kVersion},
          {"seed", config.seed},
          {"config_hash", config_hash(config)},
          {"config", config_json(config)},
          {"wall_clock_s", seconds_since(started)}};
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Vec2 xy(const Vec3& v) { return {v.x(), v.y()}; }

}  // namespace

// ---------------------------------------------------------------- metrics

double chamfer_distance(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  if (a.empty() || b.empty()) throw ShapeMismatch("chamfer distance of an empty polyline");
  auto directed = [](const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
    double sum = 0.0;
    for (const Vec2& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec2& q : to) best = std::min(best, (p - q).norm());
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (directed(a, b) + directed(b, a));
}

double average_precision(std::vector<std::pair<double, bool>> detections, long ground_truth) {
  if (ground_truth <= 0) return 0.0;
  std::stable_sort(detections.begin(), detections.end(),
                   [](const auto& l, const auto& r) { return l.first > r.first; });
  std::vector<double> precision;
  std::vector<double> recall;
  long tp = 0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    tp += detections[i].second ? 1 : 0;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(ground_truth));
  }
  // All-point interpolation: precision envelope integrated over recall.
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

ForecastAccumulator::ForecastAccumulator(int horizons)
    : l2_sum(static_cast<std::size_t>(horizons), 0.0),
      l2_count(static_cast<std::size_t>(horizons), 0),
      chamfer_sum(static_cast<std::size_t>(horizons), 0.0),
      chamfer_count(static_cast<std::size_t>(horizons), 0),
      detections(kApThresholds.size()) {}

void ForecastAccumulator::add(int horizon, const InstanceSet& predicted, const InstanceSet& truth) {
  if (predicted.agents.size() != truth.agents.size() || predicted.maps.size() != truth.maps.size()) {
    throw ShapeMismatch("forecast and ground truth differ in slot counts");
  }
  const auto h = static_cast<std::size_t>(horizon);
  std::vector<Vec2> gt_centers;
  for (std::size_t i = 0; i < truth.agents.size(); ++i) {
    const auto& t = truth.agents[i].anchor;
    if (!slot_active(t)) continue;
    gt_centers.push_back(xy(t.center));
    const auto& p = predicted.agents[i].anchor;
    if (p.id == t.id) {
      l2_sum[h] += (xy(p.center) - xy(t.center)).norm();
      ++l2_count[h];
    }
  }
  ground_truth += static_cast<long>(gt_centers.size());

  std::vector<std::pair<double, Vec2>> dets;
  for (const auto& a : predicted.agents) {
    if (a.anchor.id != kEmptySlot) dets.emplace_back(a.anchor.existence, xy(a.anchor.center));
  }
  std::stable_sort(dets.begin(), dets.end(), [](const auto& l, const auto& r) { return l.first > r.first; });
  for (std::size_t k = 0; k < kApThresholds.size(); ++k) {
    std::vector<bool> used(gt_centers.size(), false);
    for (const auto& [conf, c] : dets) {
      std::size_t best = gt_centers.size();
      double best_d = kApThresholds[k];
      for (std::size_t j = 0; j < gt_centers.size(); ++j) {
        const double d = (gt_centers[j] - c).norm();
        if (!used[j] && d <= best_d) {
          best_d = d;
          best = j;
        }
      }
      if (best < gt_centers.size()) used[best] = true;
      detections[k].emplace_back(conf, best < gt_centers.size());
    }
  }

  for (std::size_t i = 0; i < truth.maps.size(); ++i) {
    const auto& t = truth.maps[i].anchor;
    const auto& p = predicted.maps[i].anchor;
    if (!slot_active(t) || p.id != t.id || p.points.empty()) continue;
    chamfer_sum[h] += chamfer_distance(p.points, t.points);
    ++chamfer_count[h];
  }
}

nlohmann::json ForecastAccumulator::result(double dt) const {
  std::vector<double> horizons, l2, chamfer;
  for (std::size_t h = 0; h < l2_sum.size(); ++h) {
    horizons.push_back(static_cast<double>(h + 1) * dt);
    l2.push_back(l2_count[h] > 0 ? l2_sum[h] / static_cast<double>(l2_count[h]) : 0.0);
    chamfer.push_back(chamfer_count[h] > 0 ? chamfer_sum[h] / static_cast<double>(chamfer_count[h]) : 0.0);
  }
  nlohmann::json ap = nlohmann::json::object();
  std::vector<double> aps;
  for (std::size_t k = 0; k < kApThresholds.size(); ++k) {
    const double v = average_precision(detections[k], ground_truth);
    aps.push_back(v);
    char key[16];
    std::snprintf(key, sizeof key, "%.1f", kApThresholds[k]);
    ap[key] = v;
  }
  return {{"horizons_s", horizons},       {"center_l2", l2},         {"center_l2_avg", mean_of(l2)},
          {"ap", ap},                     {"mean_ap", mean_of(aps)}, {"map_chamfer", chamfer},
          {"map_chamfer_avg", mean_of(chamfer)}};
}

void PlanningAccumulator::add(const Trajectory& executed, const Trajectory& truth, const std::vector<bool>& collided) {
  if (executed.steps() != kPlanningSteps || truth.steps() != kPlanningSteps || collided.size() != kPlanningSteps) {
    throw ShapeMismatch("planning metrics expect " + std::to_string(kPlanningSteps) + " steps");
  }
  for (std::size_t s = 0; s < kPlanningSteps; ++s) {
    l2_sum[s] += (executed.waypoints[s] - truth.waypoints[s]).norm();
    collisions[s] += collided[s] ? 1 : 0;
  }
  ++scenes;
}

namespace {

// Cumulative average over the steps up to each horizon.
std::pair<std::vector<double>, std::vector<double>> planning_curves(const PlanningAccumulator& a) {
  std::vector<double> l2, col;
  for (double horizon : kPlanHorizons) {
    const int steps = static_cast<int>(std::lround(horizon / 0.5));
    double l = 0.0, c = 0.0;
    for (int s = 0; s < steps; ++s) {
      l += a.l2_sum[static_cast<std::size_t>(s)];
      c += static_cast<double>(a.collisions[static_cast<std::size_t>(s)]);
    }
    const double n = a.scenes > 0 ? static_cast<double>(a.scenes) * steps : 1.0;
    l2.push_back(l / n);
    col.push_back(c / n);
  }
  return {l2, col};
}

}  // namespace

double PlanningAccumulator::mean_l2() const { return mean_of(planning_curves(*this).first); }
double PlanningAccumulator::mean_collision() const { return mean_of(planning_curves(*this).second); }

nlohmann::json PlanningAccumulator::result() const {
  const auto [l2, col] = planning_curves(*this);
  return {{"horizons_s", kPlanHorizons}, {"l2", l2},  {"l2_avg", mean_of(l2)}, {"collision", col},
          {"collision_avg", mean_of(col)}, {"scenes", scenes}};
}

std::vector<bool> ground_truth_collisions(const Scenario& scenario, int t, const Trajectory& executed) {
  const EgoAnchor ego = ego_frame_view(scenario, t).first.ego;
  std::vector<bool> out(executed.steps(), false);
  for (int k = 1; k <= static_cast<int>(executed.steps()); ++k) {
    const OrientedBox2D ego_box = box_along(ego, executed, k);
    for (const auto& a : agents_at_in_frame(scenario, t, k)) {
      if (!slot_active(a)) continue;
      if (min_distance_vector(ego_box, obb_of(a)).distance < 0.0) {
        out[static_cast<std::size_t>(k - 1)] = true;
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- planners

FmpPlanner::FmpPlanner(const MotionParams& params, int window, bool use_scl_head)
    : params_(params), window_(window), use_scl_head_(use_scl_head) {}

ActionCondition FmpPlanner::plan(const InstanceMemoryQueue& queue, std::int64_t t) {
  std::vector<InstanceSet> frames = queue.window(t, window_);
  std::reverse(frames.begin(), frames.end());
  const MotionOutput out = predict_motion(frames, params_, use_scl_head_);
  return to_action_condition(out.ego, frames.front().ego.velocity.x());
}

Trajectory rollout_ego_path(const RolloutResult& rollout, int steps) {
  if (rollout.steps.empty() || rollout.conditions.size() != rollout.steps.size()) {
    throw ShapeMismatch("rollout has no executed steps");
  }
  const int f = static_cast<int>(rollout.steps.size());
  const ActionCondition& last = rollout.conditions.back();
  if (static_cast<int>(last.planned.steps()) + f - 1 < steps) throw ShapeMismatch("rollout plan too short");
  Trajectory out;
  out.dt = last.planned.dt;
  Pose2D pose;  // frame t0 + k inside frame t0
  for (int s = 1; s <= steps; ++s) {
    if (s <= f) {
      const EgoMotionStep& step = rollout.steps[static_cast<std::size_t>(s - 1)];
      out.waypoints.push_back(pose.apply(step.displacement));
      if (s < f) pose = pose.compose(step.pose());
    } else {
      out.waypoints.push_back(pose.apply(last.planned.waypoints[static_cast<std::size_t>(s - f)]));
    }
  }
  return out;
}

// ---------------------------------------------------------------- evaluation

namespace {

std::vector<int> eval_starts(const RunConfig& config, const Scenario& sc, int horizon) {
  std::vector<int> out;
  for (int t = config.rollout.history; t + horizon < sc.duration(); t += config.eval_stride) out.push_back(t);
  return out;
}

void merge(PlanningAccumulator& into, const PlanningAccumulator& from) {
  for (std::size_t s = 0; s < kPlanningSteps; ++s) {
    into.l2_sum[s] += from.l2_sum[s];
    into.collisions[s] += from.collisions[s];
  }
  into.scenes += from.scenes;
}

void merge(MotionMetricsAccumulator& into, const MotionMetricsAccumulator& from) {
  into.ade_sum += from.ade_sum;
  into.fde_sum += from.fde_sum;
  into.misses += from.misses;
  into.matched += from.matched;
  into.hits += from.hits;
  into.false_positives += from.false_positives;
  into.ground_truth += from.ground_truth;
}

void merge(ForecastAccumulator& into, const ForecastAccumulator& from) {
  for (std::size_t h = 0; h < into.l2_sum.size(); ++h) {
    into.l2_sum[h] += from.l2_sum[h];
    into.l2_count[h] += from.l2_count[h];
    into.chamfer_sum[h] += from.chamfer_sum[h];
    into.chamfer_count[h] += from.chamfer_count[h];
  }
  for (std::size_t k = 0; k < into.detections.size(); ++k) {
    into.detections[k].insert(into.detections[k].end(), from.detections[k].begin(), from.detections[k].end());
  }
  into.ground_truth += from.ground_truth;
}

// Per-scene accumulation of motion metrics, counted agent by agent.
void add_motion(MotionMetricsAccumulator& acc, const std::vector<MultiModalTrajectory>& predicted,
                const InstanceSet& current, const std::vector<Trajectory>& truth) {
  std::vector<AgentPrediction> preds;
  std::vector<AgentTruth> gts;
  for (std::size_t i = 0; i < current.agents.size(); ++i) {
    const auto& a = current.agents[i].anchor;
    if (!slot_active(a)) continue;
    gts.push_back({a.id, xy(a.center), truth[i]});
    if (!predicted[i].modes.empty()) preds.push_back({a.id, xy(a.center), predicted[i]});
  }
  if (gts.empty()) return;
  const MotionMetrics m = motion_metrics(preds, gts);
  acc.ade_sum += m.min_ade * m.matched;
  acc.fde_sum += m.min_fde * m.matched;
  acc.misses += m.matched - m.hits;
  acc.matched += m.matched;
  acc.hits += m.hits;
  acc.false_positives += m.false_positives;
  acc.ground_truth += m.ground_truth;
}

std::vector<Trajectory> best_modes(const std::vector<MultiModalTrajectory>& predicted, const InstanceSet& current,
                                   std::vector<AgentAnchor>& agents) {
  std::vector<Trajectory> out;
  agents.clear();
  for (std::size_t i = 0; i < current.agents.size(); ++i) {
    if (!slot_active(current.agents[i].anchor) || predicted[i].modes.empty()) continue;
    agents.push_back(current.agents[i].anchor);
    out.push_back(predicted[i].modes[predicted[i].best()]);
  }
  return out;
}

const std::array<std::string, 4> kLadder{"none", "fif", "fif_scl", "fif_scl_ats"};

PlanningResult plan_scene(const RunConfig& config, const Models& models, const Scenario& sc) {
  PlanningResult r;
  for (const auto& rung : kLadder) r.ladder[rung] = {};
  const int m = config.rollout.window;
  const AblationFlags& fl = config.flags;
  for (int t : eval_starts(config, sc, kPlanningSteps)) {
    const std::vector<InstanceSet> history = history_frames(sc, t, m);
    const InstanceSet& cur = history.front();
    const Trajectory truth = scripted_condition(sc, t).planned;
    const std::vector<Trajectory> agent_truth = agent_futures_in_frame(sc, t, kPlanningSteps);

    const MotionOutput base = predict_motion(history, models.motion, false);
    const Trajectory base_scl = predict_motion(history, models.motion, true).ego;

    InstanceMemoryQueue queue = observed_queue(sc, t, config.rollout);
    FmpPlanner fmp(models.motion, m, false);
    const RolloutResult roll = rollout(queue, config.rollout, models.dreamer, fmp, fl.dreamer());
    const MotionOutput refined = refine_motion(cur, roll.frames, models.motion, false);
    const Trajectory refined_scl = refine_motion(cur, roll.frames, models.motion, true).ego;
    const Trajectory future = rollout_ego_path(roll, kPlanningSteps);

    add_motion(r.motion_baseline, base.agents, cur, agent_truth);
    add_motion(r.motion_refined, refined.agents, cur, agent_truth);

    std::vector<AgentAnchor> agents, agents_refined;
    const std::vector<Trajectory> trajs_base = best_modes(base.agents, cur, agents);
    const std::vector<Trajectory> trajs_refined = best_modes(refined.agents, cur, agents_refined);

    auto score = [&](PlanningAccumulator& acc, const Trajectory& executed) {
      acc.add(executed, truth, ground_truth_collisions(sc, t, executed));
    };
    auto choose = [&](const CandidateSet& c) { return select(c, cur.ego, agents, trajs_base, trajs_refined, config.safety); };

    score(r.baseline, base.ego);
    score(r.ladder["none"], base.ego);
    score(r.ladder["fif"], refined.ego);
    score(r.ladder["fif_scl"], refined_scl);
    score(r.ladder["fif_scl_ats"], choose({base_scl, future, refined_scl}).final_trajectory);

    const Trajectory& plan_base = fl.use_scl ? base_scl : base.ego;
    const Trajectory& plan_refined = fl.use_scl ? refined_scl : refined.ego;
    if (fl.use_ats) {
      const SelectionReport sel = choose({plan_base, future, plan_refined});
      score(r.selected, sel.final_trajectory);
      ++r.chosen[std::string(to_string(sel.chosen))];
      r.fallbacks += sel.fallback ? 1 : 0;
      for (const auto& c : sel.candidates) {
        if (c.provenance == sel.chosen) r.scl_sum += c.scl;
      }
      ++r.selections;
    } else {
      score(r.selected, fl.use_fif ? plan_refined : plan_base);
    }
  }
  return r;
}

nlohmann::json planning_json(const PlanningResult& r, const AblationFlags& flags) {
  nlohmann::json ladder = nlohmann::json::object();
  for (const auto& rung : kLadder) ladder[rung] = r.ladder.at(rung).result();
  return {{"flags",
           {{"use_fif", flags.use_fif}, {"use_scl", flags.use_scl}, {"use_ats", flags.use_ats}}},
          {"baseline", r.baseline.result()},
          {"selected", r.selected.result()},
          {"ladder", ladder}};
}

nlohmann::json motion_json(const MotionMetricsAccumulator& acc) {
  const MotionMetrics m = acc.result();
  return {{"min_ade", m.min_ade}, {"min_fde", m.min_fde},   {"miss_rate", m.miss_rate},
          {"epa", m.epa},         {"matched", m.matched},   {"hits", m.hits},
          {"false_positives", m.false_positives}, {"ground_truth", m.ground_truth}};
}

nlohmann::json ats_json(const PlanningResult& r) {
  nlohmann::json chosen = {{"base", 0}, {"future", 0}, {"refined", 0}};
  for (const auto& [k, v] : r.chosen) chosen[k] = v;
  return {{"selections", r.selections},
          {"chosen", chosen},
          {"fallbacks", r.fallbacks},
          {"mean_scl", r.selections > 0 ? r.scl_sum / static_cast<double>(r.selections) : 0.0}};
}

}  // namespace

PlanningResult evaluate_planning(const RunConfig& config, const Models& models, const std::vector<Scenario>& scenes) {
  config.validate();
  std::vector<PlanningResult> parts(scenes.size());
  detail::parallel_for(static_cast<int>(scenes.size()), config.jobs, [&](int i) {
    parts[static_cast<std::size_t>(i)] = plan_scene(config, models, scenes[static_cast<std::size_t>(i)]);
  });
  PlanningResult total;
  for (const auto& rung : kLadder) total.ladder[rung] = {};
  for (const auto& p : parts) {
    merge(total.baseline, p.baseline);
    merge(total.selected, p.selected);
    for (const auto& rung : kLadder) merge(total.ladder[rung], p.ladder.at(rung));
    merge(total.motion_baseline, p.motion_baseline);
    merge(total.motion_refined, p.motion_refined);
    for (const auto& [k, v] : p.chosen) total.chosen[k] += v;
    total.fallbacks += p.fallbacks;
    total.scl_sum += p.scl_sum;
    total.selections += p.selections;
  }
  return total;
}

ForecastResult evaluate_forecast(const RunConfig& config, const Models& models, const std::vector<Scenario>& scenes) {
  config.validate();
  const int f = config.rollout.forecast;
  std::vector<ForecastResult> parts(scenes.size(), ForecastResult{ForecastAccumulator(f), ForecastAccumulator(f),
                                                                  ForecastAccumulator(f)});
  detail::parallel_for(static_cast<int>(scenes.size()), config.jobs, [&](int i) {
    const Scenario& sc = scenes[static_cast<std::size_t>(i)];
    ForecastResult& r = parts[static_cast<std::size_t>(i)];
    for (int t0 : eval_starts(config, sc, f)) {
      const std::vector<InstanceSet> truth = ground_truth_future(sc, t0, f);
      InstanceMemoryQueue q_proj = observed_queue(sc, t0, config.rollout);
      InstanceMemoryQueue q_dream = q_proj;
      const InstanceSet current = q_proj.at(t0);
      OraclePlanner oracle(sc);
      const RolloutResult proj = projection_rollout(q_proj, config.rollout, oracle);
      const RolloutResult dream = rollout(q_dream, config.rollout, models.dreamer, oracle, config.flags.dreamer());
      for (int k = 0; k < f; ++k) {
        const auto& gt = truth[static_cast<std::size_t>(k)];
        r.copy_paste.add(k, current, gt);
        r.projection.add(k, proj.frames[static_cast<std::size_t>(k)], gt);
        r.dreamer.add(k, dream.frames[static_cast<std::size_t>(k)], gt);
      }
    }
  });
  ForecastResult total{ForecastAccumulator(f), ForecastAccumulator(f), ForecastAccumulator(f)};
  for (const auto& p : parts) {
    merge(total.copy_paste, p.copy_paste);
    merge(total.projection, p.projection);
    merge(total.dreamer, p.dreamer);
  }
  return total;
}

// ---------------------------------------------------------------- commands

namespace {

std::vector<InstanceSet> scene_log(const Scenario& sc) {
  std::vector<InstanceSet> frames;
  for (int t = 0; t < sc.duration(); ++t) frames.push_back(ego_frame_view(sc, t).first);
  return frames;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + " is not valid JSON: " + e.what());
  }
}

// Regenerates every scenario listed in the manifest and checks it against
// the stored scene log.
std::vector<Scenario> load_dataset(const RunConfig& config) {
  const std::filesystem::path manifest_path = config.dataset / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IoError("dataset manifest not found: " + manifest_path.string());
  const nlohmann::json manifest = read_json_file(manifest_path);
  if (manifest.value("format", "") != "sparseworld-dataset") {
    throw ValidationError(manifest_path.string() + " is not a sparseworld dataset manifest");
  }
  const auto& entries = manifest.at("scenarios");
  std::vector<ScenarioConfig> configs;
  for (const auto& e : entries) configs.push_back(e.at("config").get<ScenarioConfig>());
  std::vector<Scenario> scenarios = generate_all(configs, config.jobs);
  detail::parallel_for(static_cast<int>(scenarios.size()), config.jobs, [&](int i) {
    const auto file = config.dataset / entries[static_cast<std::size_t>(i)].at("file").get<std::string>();
    const nlohmann::json stored = read_scene_log(file);
    const nlohmann::json regenerated = scene_log(scenarios[static_cast<std::size_t>(i)]);
    if (stored != regenerated) {
      throw ValidationError("scene log " + file.string() + " does not match its recorded configuration");
    }
  });
  return scenarios;
}

void require_checkpoint(const RunConfig& config) {
  if (!std::filesystem::exists(config.checkpoint)) {
    throw MissingCheckpoint("checkpoint not found: " + config.checkpoint.string());
  }
}

DreamerConfig dreamer_config(const RunConfig& c) {
  DreamerConfig d;
  d.blocks = c.dreamer_blocks;
  d.heads = c.dreamer_heads;
  d.width = c.dreamer_width;
  d.window = c.rollout.window;
  d.seed = c.seed * 7919 + 17;
  return d;
}

MotionConfig motion_config(const RunConfig& c) {
  MotionConfig m;
  m.blocks = c.motion_blocks;
  m.heads = c.motion_heads;
  m.width = c.motion_width;
  m.seed = c.seed * 7919 + 29;
  return m;
}

nlohmann::json forecast_json(const ForecastResult& r, double dt) {
  return {{"split", "eval"},
          {"copy_paste", r.copy_paste.result(dt)},
          {"projection", r.projection.result(dt)},
          {"dreamer", r.dreamer.result(dt)}};
}

}  // namespace

nlohmann::json cmd_gen(const RunConfig& config) {
  const auto started = Clock::now();
  config.validate();
  const auto configs = train_split(config);
  std::error_code ec;
  std::filesystem::create_directories(config.dataset / "scenes", ec);
  if (ec) throw IoError("cannot create dataset directory " + config.dataset.string() + ": " + ec.message());

  std::vector<std::string> files(configs.size());
  detail::parallel_for(static_cast<int>(configs.size()), config.jobs, [&](int i) {
    char name[32];
    std::snprintf(name, sizeof name, "scenes/scene_%05d.jsonl", i);
    files[static_cast<std::size_t>(i)] = name;
    write_scene_log(config.dataset / name, scene_log(generate(configs[static_cast<std::size_t>(i)])));
  });
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < configs.size(); ++i) entries.push_back({{"file", files[i]}, {"config", configs[i]}});
  const nlohmann::json manifest = {{"format", "sparseworld-dataset"},
                                   {"version", 1},
                                   {"seed", config.seed},
                                   {"count", configs.size()},
                                   {"rollout", config.rollout},
                                   {"scenarios", entries}};
  write_report(config.dataset / "manifest.json", manifest);

  nlohmann::json report = {{"dataset", {{"count", configs.size()}, {"files", files}}}};
  report["meta"] = meta(config, "gen", started);
  write_report(config.report, report);
  return report;
}

nlohmann::json cmd_train(const RunConfig& config, std::function<void(const std::string&)> log) {
  const auto started = Clock::now();
  config.validate();
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  const std::vector<Scenario> scenarios = load_dataset(config);
  say("loaded " + std::to_string(scenarios.size()) + " scenarios");

  Models models{DreamerParams(dreamer_config(config)), MotionParams(motion_config(config))};
  DreamerTrainOptions dopt;
  dopt.epochs = config.dreamer_epochs;
  dopt.starts_per_scenario = config.dreamer_starts;
  dopt.learning_rate = config.dreamer_lr;
  dopt.final_learning_rate = config.dreamer_final_lr;
  dopt.adam = true;
  dopt.jobs = config.jobs;
  dopt.seed = config.seed;
  dopt.on_epoch = [&](int e, double loss) { say("dreamer epoch " + std::to_string(e) + " loss " + std::to_string(loss)); };
  const TrainSummary dsum = train_dreamer(models.dreamer, scenarios, config.rollout, dopt);

  // Motion samples: every start contributes its observed history and the
  // dreamer's rollout from it.
  const int m = config.rollout.window;
  std::vector<std::vector<MotionSample>> hist_parts(scenarios.size()), future_parts(scenarios.size());
  detail::parallel_for(static_cast<int>(scenarios.size()), config.jobs, [&](int i) {
    const Scenario& sc = scenarios[static_cast<std::size_t>(i)];
    for (int t = config.rollout.history; t + kPlanningSteps < sc.duration(); t += config.motion_stride) {
      std::vector<InstanceSet> history = history_frames(sc, t, m);
      InstanceSet current = history.front();
      hist_parts[static_cast<std::size_t>(i)].push_back(motion_sample(sc, t, std::move(history)));
      InstanceMemoryQueue queue = observed_queue(sc, t, config.rollout);
      OraclePlanner oracle(sc);
      RolloutResult roll = rollout(queue, config.rollout, models.dreamer, oracle, config.flags.dreamer());
      std::vector<InstanceSet> frames{std::move(current)};
      for (auto& f : roll.frames) frames.push_back(std::move(f));
      future_parts[static_cast<std::size_t>(i)].push_back(motion_sample(sc, t, std::move(frames)));
    }
  });
  std::vector<MotionSample> all, futures;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    for (auto& s : hist_parts[i]) all.push_back(std::move(s));
    for (auto& s : future_parts[i]) {
      futures.push_back(s);
      all.push_back(std::move(s));
    }
  }
  say("motion samples " + std::to_string(all.size()));

  MotionTrainOptions mopt;
  mopt.epochs = config.motion_epochs;
  mopt.learning_rate = config.motion_lr;
  mopt.final_learning_rate = config.motion_final_lr;
  mopt.adam = true;
  mopt.jobs = config.jobs;
  mopt.seed = config.seed + 1;
  mopt.on_epoch = [&](int e, double loss) { say("motion epoch " + std::to_string(e) + " loss " + std::to_string(loss)); };
  const std::vector<double> mloss = train_motion(models.motion, all, mopt);

  models.motion.reset_scl_head();
  MotionTrainOptions sopt = mopt;
  sopt.epochs = config.scl_epochs;
  sopt.scl_phase = true;
  sopt.scl_weight = config.scl_weight;
  sopt.safety = config.safety;
  sopt.seed = config.seed + 2;
  sopt.on_epoch = [&](int e, double loss) { say("safety epoch " + std::to_string(e) + " loss " + std::to_string(loss)); };
  const std::vector<double> sloss = train_motion(models.motion, futures, sopt);

  const nlohmann::json training = {
      {"scenarios", scenarios.size()},
      {"dreamer", {{"epoch_loss", dsum.epoch_loss}, {"steps", dsum.steps}}},
      {"motion", {{"epoch_loss", mloss}, {"samples", all.size()}}},
      {"safety_head", {{"epoch_loss", sloss}, {"samples", futures.size()}}}};
  save_checkpoint(config.checkpoint, models, training);

  nlohmann::json report = {{"training", training}};
  report["meta"] = meta(config, "train", started);
  write_report(config.report, report);
  return report;
}

nlohmann::json cmd_rollout(const RunConfig& config) {
  const auto started = Clock::now();
  config.validate();
  require_checkpoint(config);
  const Models models = load_checkpoint(config.checkpoint);
  const auto scenes = generate_all(eval_split(config), config.jobs);
  nlohmann::json report = {{"forecast", forecast_json(evaluate_forecast(config, models, scenes), config.rollout.dt)}};
  report["meta"] = meta(config, "rollout", started);
  write_report(config.report, report);
  return report;
}

namespace {

nlohmann::json plan_sections(const RunConfig& config, const Models& models) {
  const PlanningResult mixed = evaluate_planning(config, models, generate_all(eval_split(config), config.jobs));
  const PlanningResult adv = evaluate_planning(config, models, generate_all(adversarial_split(config), config.jobs));
  return {{"planning", {{"eval", planning_json(mixed, config.flags)}, {"adversarial", planning_json(adv, config.flags)}}},
          {"motion",
           {{"split", "eval"}, {"baseline", motion_json(mixed.motion_baseline)}, {"refined", motion_json(mixed.motion_refined)}}},
          {"ats", {{"eval", ats_json(mixed)}, {"adversarial", ats_json(adv)}}}};
}

}  // namespace

nlohmann::json cmd_plan(const RunConfig& config) {
  const auto started = Clock::now();
  config.validate();
  require_checkpoint(config);
  const Models models = load_checkpoint(config.checkpoint);
  nlohmann::json report = plan_sections(config, models);
  report["meta"] = meta(config, "plan", started);
  write_report(config.report, report);
  return report;
}

nlohmann::json cmd_eval(const RunConfig& config) {
  const auto started = Clock::now();
  config.validate();
  require_checkpoint(config);
  const Models models = load_checkpoint(config.checkpoint);
  nlohmann::json report = plan_sections(config, models);
  const auto scenes = generate_all(eval_split(config), config.jobs);
  report["forecast"] = forecast_json(evaluate_forecast(config, models, scenes), config.rollout.dt);
  report["meta"] = meta(config, "eval", started);
  write_report(config.report, report);
  return report;
}

namespace {

// Window of m + 1 frames with `agents` random agent slots and `maps` random
// map slots, plus the projected next frame.
DecoderInput bench_input(int agents, int maps, int window, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-50.0, 50.0), vel(-8.0, 8.0), yaw(-kPi, kPi);
  InstanceSet frame;
  frame.ego.velocity = {8.0, 0.0, 0.0};
  for (int i = 0; i < agents; ++i) {
    AgentInstance a;
    a.anchor.id = i + 1;
    a.anchor.center = {pos(rng), pos(rng), 0.0};
    a.anchor.size = {1.9, 4.5, 1.6};
    a.anchor.heading = Heading::from_angle(yaw(rng));
    a.anchor.velocity = {vel(rng), vel(rng), 0.0};
    a.anchor.existence = 1.0;
    frame.agents.push_back(a);
  }
  for (int i = 0; i < maps; ++i) {
    MapInstance mi;
    mi.anchor.id = 1000 + i;
    mi.anchor.existence = 1.0;
    const Vec2 start{pos(rng), pos(rng)};
    const double dir = yaw(rng);
    for (int k = 0; k < kMapPoints; ++k) mi.anchor.points.push_back(start + rotate2d({2.0 * k, 0.0}, dir));
    frame.maps.push_back(mi);
  }
  DecoderInput in;
  for (int j = 0; j <= window; ++j) {
    InstanceSet f = frame;
    f.frame_index = j;
    in.window.push_back(std::move(f));
  }
  in.condition.speed = 8.0;
  in.condition.planned.dt = 0.5;
  for (int k = 1; k <= kPlanningSteps; ++k) in.condition.planned.waypoints.emplace_back(4.0 * k, 0.0);
  in.projected = project_instances(in.window.back(), step_from_condition(frame.ego, in.condition, 0.5));
  return in;
}

}  // namespace

nlohmann::json cmd_bench(const RunConfig& config) {
  const auto started = Clock::now();
  config.validate();
  DreamerConfig dc = dreamer_config(config);
  const DreamerParams params(dc);
  struct Scale {
    std::string name;
    int agents;
    int maps;
  };
  const std::vector<Scale> scales{{"desk", kDefaultAgentSlots, kDefaultMapSlots},
                                  {"sweep_32", 32, kDefaultMapSlots},
                                  {"sweep_128", 128, kDefaultMapSlots},
                                  {"sweep_512", 512, kDefaultMapSlots},
                                  {"sweep_1000", 1000, kDefaultMapSlots},
                                  {"full_900_100", 900, 100}};
  nlohmann::json rows = nlohmann::json::array();
  std::vector<double> sweep;
  for (const auto& s : scales) {
    const DecoderInput in = bench_input(s.agents, s.maps, dc.window, config.seed + 11);
    (void)decoder_step(in, params, config.flags.dreamer());  // warm-up
    std::vector<double> ms;
    for (int r = 0; r < config.bench_repeats; ++r) {
      const auto t0 = Clock::now();
      const InstanceSet out = decoder_step(in, params, config.flags.dreamer());
      ms.push_back(1e3 * seconds_since(t0));
      if (out.agents.size() != static_cast<std::size_t>(s.agents)) throw ShapeMismatch("benchmark output lost slots");
    }
    std::sort(ms.begin(), ms.end());
    const std::size_t mid = ms.size() / 2;
    const double median = ms.size() % 2 == 1 ? ms[mid] : 0.5 * (ms[mid - 1] + ms[mid]);
    if (s.name.rfind("sweep_", 0) == 0) sweep.push_back(median);
    rows.push_back({{"name", s.name},
                    {"agent_slots", s.agents},
                    {"map_slots", s.maps},
                    {"repeats", config.bench_repeats},
                    {"median_ms", median},
                    {"min_ms", ms.front()},
                    {"max_ms", ms.back()},
                    {"peak_rss_kib", peak_rss_kib()}});
  }
  const bool monotonic = std::is_sorted(sweep.begin(), sweep.end());
  nlohmann::json report = {{"bench", {{"scales", rows}, {"sweep_monotonic_ms", monotonic}}}};
  report["meta"] = meta(config, "bench", started);
  write_report(config.report, report);
  return report;
}

}  // namespace sparseworld
