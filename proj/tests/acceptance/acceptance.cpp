// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
//   acceptance --cli <path to sparseworld> --workdir <dir> [--only 1,2,...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "sparseworld/alignment.hpp"
#include "sparseworld/dreamer.hpp"
#include "sparseworld/harness.hpp"
#include "sparseworld/motion.hpp"
#include "sparseworld/safety.hpp"

namespace sw = sparseworld;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass{false};
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// ------------------------------------------------------------- criterion 1

Outcome projection_exactness() {
  const auto start = Clock::now();
  long pairs = 0;
  double worst_center = 0.0;
  double worst_heading = 0.0;
  const double omegas[] = {0.0, 0.12, -0.2, 0.3, -0.05};
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const double omega = omegas[seed % 5];
    const auto sc = oracle::constant_motion_scenario(seed + 100, 4.0 + 0.2 * static_cast<double>(seed), omega);
    for (int t = 0; t + 1 < sc.duration(); ++t) {
      const auto cur = sw::ego_frame_view(sc, t).first;
      const auto next = sw::ego_frame_view(sc, t + 1).first;
      const auto proj = sw::project_instances(cur, sw::frame_step(cur.ego, sc.config.dt));
      for (std::size_t i = 0; i < cur.agents.size(); ++i) {
        if (!sw::slot_active(cur.agents[i].anchor)) continue;
        const auto& p = proj.agents[i].anchor;
        const auto& g = next.agents[i].anchor;
        worst_center = std::max(worst_center, (p.center - g.center).norm());
        worst_heading =
            std::max(worst_heading, std::abs(std::remainder(p.heading.angle() - g.heading.angle(), 2 * sw::kPi)));
        ++pairs;
      }
      for (std::size_t i = 0; i < cur.maps.size(); ++i) {
        if (!sw::slot_active(cur.maps[i].anchor)) continue;
        for (std::size_t k = 0; k < cur.maps[i].anchor.points.size(); ++k) {
          worst_center =
              std::max(worst_center, (proj.maps[i].anchor.points[k] - next.maps[i].anchor.points[k]).norm());
        }
        ++pairs;
      }
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = pairs >= 10000 && worst_center <= 1e-9 && worst_heading <= 1e-9 && elapsed < 10.0;
  return {pass, std::to_string(pairs) + " pairs, max center err " + fmt(worst_center) + " m, max heading err " +
                    fmt(worst_heading) + " rad, " + fmt(elapsed, 3) + " s"};
}

// ------------------------------------------------------------- criterion 2

sw::OrientedBox2D random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-5.0, 5.0), half(0.25, 2.5), yaw(-sw::kPi, sw::kPi);
  sw::OrientedBox2D b;
  b.center = {pos(rng), pos(rng)};
  b.half_extents = {half(rng), half(rng)};
  b.heading = sw::Heading::from_angle(yaw(rng));
  return b;
}

// Anchor whose box_along at step 1 is exactly `b`: the only waypoint sits on
// the anchor center, so the heading falls back to the anchor heading.
template <typename Anchor>
Anchor anchor_of(const sw::OrientedBox2D& b) {
  Anchor a;
  a.center = {b.center.x(), b.center.y(), 0.0};
  a.size = {2.0 * b.half_extents.y(), 2.0 * b.half_extents.x(), 1.5};
  a.heading = b.heading;
  if constexpr (std::is_same_v<Anchor, sw::AgentAnchor>) {
    a.id = 1;
    a.existence = 1.0;
  }
  return a;
}

Outcome geometry_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int verdict_mismatch = 0;
  int overlapping = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_box(rng);
    const auto b = random_box(rng);
    const oracle::Box oa = oracle::from(a);
    const oracle::Box ob = oracle::from(b);
    const bool overlap = oracle::overlap(oa, ob);
    const double expected = overlap ? -oracle::penetration(oa, ob) : oracle::gap(oa, ob, 2500);
    const double got = sw::min_distance_vector(a, b).distance;
    worst = std::max(worst, std::abs(got - expected));

    const sw::EgoAnchor ego = anchor_of<sw::EgoAnchor>(a);
    const sw::AgentAnchor agent = anchor_of<sw::AgentAnchor>(b);
    const sw::Trajectory ego_path{{a.center}, 0.5};
    const sw::Trajectory agent_path{{b.center}, 0.5};
    const bool detected = sw::collision_detect(ego_path, ego, {agent}, {agent_path})[0];
    verdict_mismatch += (detected != overlap) ? 1 : 0;
    overlapping += overlap ? 1 : 0;
  }
  const double elapsed = seconds_since(start);
  const bool pass = worst <= 1e-2 && verdict_mismatch == 0 && elapsed < 30.0;
  return {pass, "1000 pairs (" + std::to_string(overlapping) + " overlapping), max distance err " + fmt(worst) +
                    " m, verdict mismatches " + std::to_string(verdict_mismatch) + ", " + fmt(elapsed, 3) + " s"};
}

// ------------------------------------------------------------- criterion 3

Outcome scl_correctness() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution zero(0.35);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    sw::AdjustmentVector v(6, sw::Vec2::Zero());
    // The first vector is all zeros (the 0/0 case).
    if (i > 0) {
      for (auto& s : v) s = zero(rng) ? sw::Vec2::Zero() : sw::Vec2(normal(rng), normal(rng));
    }
    worst = std::max(worst, std::abs(sw::scl(v) - oracle::safety_cost(v)));
  }
  const bool zero_case = sw::scl(sw::AdjustmentVector(6, sw::Vec2::Zero())) == 0.0;
  return {worst <= 1e-12 && zero_case, "100 vectors, max err " + fmt(worst) + ", all-zero -> 0"};
}

// ------------------------------------------------------------- criterion 4

Outcome sav_fixed_point() {
  const sw::SafetyConfig config;
  int fixed = 0, clamped = 0, active = 0, unclamped_failures = 0;
  std::vector<int> failures;
  for (int scene = 0; scene < 100; ++scene) {
    // Simulator scenes with one agent at a spread of frames. Every other
    // agent is scripted to cross the ego path, matching the training mix.
    sw::ScenarioConfig sc;
    sc.seed = 5000 + static_cast<std::uint64_t>(scene);
    sc.n_agents = 1;
    sc.n_crossing = scene % 2;
    const auto scenario = sw::generate(sc);
    const int t = 4 + scene % 8;
    const auto [view, cond] = sw::ego_frame_view(scenario, t);
    const auto futures = sw::agent_futures_in_frame(scenario, t, static_cast<int>(cond.planned.steps()));
    std::vector<sw::AgentAnchor> agents;
    std::vector<sw::Trajectory> trajs;
    for (std::size_t i = 0; i < view.agents.size(); ++i) {
      if (!sw::slot_active(view.agents[i].anchor)) continue;
      agents.push_back(view.agents[i].anchor);
      trajs.push_back(futures[i]);
    }
    const auto adj = sw::sav(cond.planned, agents, trajs, config, view.ego);
    const auto again = sw::sav(sw::apply_adjustment(cond.planned, adj), agents, trajs, config, view.ego);
    double residual = 0.0;
    bool hit_cap = false;
    for (std::size_t j = 0; j < adj.size(); ++j) {
      residual = std::max(residual, again[j].norm());
      hit_cap = hit_cap || adj[j].norm() >= config.adjustment_cap - 1e-12;
    }
    active += sw::scl(adj) > 0.0 ? 1 : 0;
    clamped += hit_cap ? 1 : 0;
    if (residual <= 1e-6) {
      ++fixed;
    } else {
      failures.push_back(scene);
      unclamped_failures += hit_cap ? 0 : 1;
    }
  }
  std::string detail = std::to_string(fixed) + "/100 scenes are fixed points (" + std::to_string(active) +
                       " needed an adjustment, " + std::to_string(clamped) + " hit the clamp, " + std::to_string(unclamped_failures) + " unfixed without clamping)";
  if (!failures.empty()) {
    detail += "; not fixed:";
    for (int f : failures) detail += " " + std::to_string(f);
  }
  return {fixed >= 95, detail};
}

// ------------------------------------------------------------- criterion 5

void jitter(sw::nn::ParameterSet& ps, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  Eigen::VectorXd flat = ps.to_flat();
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] += normal(rng);
  ps.from_flat(flat);
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  const auto sc = sw::generate({.seed = 31, .n_crossing = 1});
  const int t = 8;

  sw::DreamerConfig dc;
  dc.width = 8;
  dc.blocks = 2;
  dc.heads = 2;
  dc.seed = 5;
  sw::DreamerParams dreamer(dc);
  jitter(dreamer.weights(), 0.05, 1);
  sw::TrainSample sample;
  const sw::InstanceMemoryQueue q = sw::observed_queue(sc, t, sw::RolloutConfig{});
  sample.input.window = q.window(t, dc.window);
  sample.input.condition = sw::scripted_condition(sc, t);
  sample.input.projected = sw::project_instances(
      sample.input.window.back(),
      sw::step_from_condition(sample.input.window.back().ego, sample.input.condition, sc.config.dt));
  sample.target = sw::ego_frame_view(sc, t + 1).first;
  const auto step = sw::train_step({sample}, dreamer);
  const auto d = oracle::check_gradient(
      dreamer.weights(), [&] { return sw::dreamer_loss(sample, dreamer).total; }, sw::nn::flatten(step.gradient), 200,
      11);

  sw::MotionConfig mc;
  mc.width = 8;
  mc.blocks = 2;
  mc.heads = 2;
  mc.seed = 6;
  sw::MotionParams motion(mc);
  jitter(motion.weights(), 0.05, 2);
  const auto ms = sw::motion_sample(sc, t, sw::history_frames(sc, t, 3));
  sw::nn::Gradients grad = motion.weights().zero_gradients();
  sw::motion_loss(ms, motion, false, 1.0, {}, &grad);
  const auto m = oracle::check_gradient(
      motion.weights(), [&] { return sw::motion_loss(ms, motion, false, 1.0, {}, nullptr).total; },
      sw::nn::flatten(grad), 200, 12);

  const double elapsed = seconds_since(start);
  const bool pass = d.max_relative_error < 1e-4 && m.max_relative_error < 1e-4 && elapsed < 120.0;
  return {pass, "dreamer max rel err " + fmt(d.max_relative_error) + " (" + std::to_string(dreamer.weights().scalar_count()) +
                    " params), motion max rel err " + fmt(m.max_relative_error) + " (" +
                    std::to_string(motion.weights().scalar_count()) + " params), 200 directions each, " +
                    fmt(elapsed, 3) + " s"};
}

// ------------------------------------------------------------ criteria 6-9

struct FullRun {
  nlohmann::json eval;
  double seconds{0.0};
  std::string error;
};

FullRun full_pipeline(const fs::path& workdir) {
  FullRun run;
  const auto start = Clock::now();
  try {
    sw::RunConfig config;
    config.dataset = workdir / "full" / "data";
    config.checkpoint = workdir / "full" / "checkpoint.json";
    config.report = workdir / "full" / "gen.json";
    fs::create_directories(workdir / "full");
    sw::cmd_gen(config);
    config.report = workdir / "full" / "train.json";
    sw::cmd_train(config, [](const std::string& line) { std::cerr << "  " << line << "\n"; });
    config.report = workdir / "full_eval.json";
    run.eval = sw::cmd_eval(config);
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  run.seconds = seconds_since(start);
  return run;
}

double at_horizon(const nlohmann::json& forecaster, double horizon) {
  const auto& hs = forecaster.at("horizons_s");
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (std::abs(hs[i].get<double>() - horizon) < 1e-9) return forecaster.at("center_l2")[i].get<double>();
  }
  throw std::runtime_error("horizon missing from report");
}

Outcome forecast_ordering(const FullRun& run) {
  if (!run.error.empty()) return {false, "pipeline failed: " + run.error};
  const auto& f = run.eval.at("forecast");
  const double d = at_horizon(f.at("dreamer"), 2.0);
  const double p = at_horizon(f.at("projection"), 2.0);
  const double c = at_horizon(f.at("copy_paste"), 2.0);
  const bool pass = d < p && p < c && d <= 0.7 * p && run.seconds <= 1800.0;
  return {pass, "L2@2s dreamer " + fmt(d) + ", projection " + fmt(p) + ", copy&paste " + fmt(c) + " (ratio " +
                    fmt(d / p, 3) + "), train+eval " + fmt(run.seconds, 4) + " s"};
}

Outcome motion_refinement(const FullRun& run) {
  if (!run.error.empty()) return {false, "pipeline failed: " + run.error};
  const auto& b = run.eval.at("motion").at("baseline");
  const auto& r = run.eval.at("motion").at("refined");
  const double mr_b = b.at("miss_rate"), mr_r = r.at("miss_rate");
  const double epa_b = b.at("epa"), epa_r = r.at("epa");
  return {mr_r <= mr_b && epa_r >= epa_b, "miss rate " + fmt(mr_b) + " -> " + fmt(mr_r) + ", EPA " + fmt(epa_b) +
                                              " -> " + fmt(epa_r)};
}

Outcome planning_safety(const FullRun& run) {
  if (!run.error.empty()) return {false, "pipeline failed: " + run.error};
  const auto& adv = run.eval.at("planning").at("adversarial");
  const double col_b = adv.at("baseline").at("collision_avg"), col_s = adv.at("selected").at("collision_avg");
  const double l2_b = adv.at("baseline").at("l2_avg"), l2_s = adv.at("selected").at("l2_avg");
  const bool pass = col_b > 0.0 && col_s <= 0.7 * col_b && l2_s <= 1.1 * l2_b;
  return {pass, "collision " + fmt(col_b) + " -> " + fmt(col_s) + " (" +
                    fmt(col_b > 0.0 ? 100.0 * (col_b - col_s) / col_b : 0.0, 3) + "% lower), L2 " + fmt(l2_b) +
                    " -> " + fmt(l2_s) + " m (" + fmt(100.0 * (l2_s - l2_b) / l2_b, 3) + "%)"};
}

Outcome ablation_monotonicity(const FullRun& run) {
  if (!run.error.empty()) return {false, "pipeline failed: " + run.error};
  const auto& ladder = run.eval.at("planning").at("adversarial").at("ladder");
  bool pass = true;
  double previous = std::numeric_limits<double>::infinity();
  std::string detail;
  for (const char* rung : {"none", "fif", "fif_scl", "fif_scl_ats"}) {
    const double c = ladder.at(rung).at("collision_avg");
    pass = pass && c <= previous + 1e-12;
    previous = c;
    detail += std::string(detail.empty() ? "" : " -> ") + rung + " " + fmt(c);
  }
  return {pass, detail};
}

// ------------------------------------------------------------ criterion 10

bool timing_key(const std::string& key) {
  auto ends_with = [&](const std::string& suffix) {
    return key.size() >= suffix.size() && key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return key == "wall_clock_s" || key == "peak_rss_kib" || ends_with("_ms");
}

nlohmann::json strip_timing(const nlohmann::json& j) {
  if (j.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!timing_key(it.key())) out[it.key()] = strip_timing(it.value());
    }
    return out;
  }
  if (j.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : j) out.push_back(strip_timing(v));
    return out;
  }
  return j;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return nlohmann::json::parse(in);
}

// Runs every command in `dir` with relative paths so both runs see the same
// configuration text.
std::string run_all_commands(const fs::path& cli, const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "small.cfg");
    cfg << "n_train = 3\nn_eval = 2\ndreamer_width = 16\ndreamer_blocks = 1\ndreamer_heads = 2\n"
           "dreamer_epochs = 1\nmotion_width = 16\nmotion_blocks = 1\nmotion_heads = 2\nmotion_epochs = 1\n"
           "scl_epochs = 2\neval_stride = 6\nbench_repeats = 1\n";
  }
  for (const char* cmd : {"gen", "train", "rollout", "plan", "eval", "bench"}) {
    const std::string line = "cd \"" + dir.string() + "\" && \"" + cli.string() + "\" " + cmd +
                             " --config small.cfg --seed 3 --dataset data --checkpoint ckpt.json --report " + cmd +
                             ".json --quiet > " + cmd + ".log 2>&1";
    if (std::system(line.c_str()) != 0) return std::string(cmd) + " exited non-zero (see " + cmd + ".log)";
  }
  return {};
}

Outcome determinism(const fs::path& cli, const fs::path& workdir) {
  const auto start = Clock::now();
  for (const char* run : {"run_a", "run_b"}) {
    const std::string err = run_all_commands(cli, workdir / run);
    if (!err.empty()) return {false, std::string(run) + ": " + err};
  }
  std::string differing;
  for (const char* cmd : {"gen", "train", "rollout", "plan", "eval", "bench"}) {
    const std::string name = std::string(cmd) + ".json";
    if (strip_timing(read_json(workdir / "run_a" / name)) != strip_timing(read_json(workdir / "run_b" / name))) {
      differing += " " + std::string(cmd);
    }
  }
  if (!differing.empty()) return {false, "reports differ:" + differing};
  return {true, "6 commands x 2 runs identical apart from timing fields, " + fmt(seconds_since(start), 3) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path cli;
  fs::path workdir = "acceptance_work";
  std::set<int> only;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--cli") {
      cli = argv[i + 1];
    } else if (flag == "--workdir") {
      workdir = argv[i + 1];
    } else if (flag == "--only") {
      std::stringstream ss(argv[i + 1]);
      for (std::string item; std::getline(ss, item, ',');) only.insert(std::stoi(item));
    } else {
      std::cerr << "unknown flag " << flag << "\n";
      return 2;
    }
  }
  fs::create_directories(workdir);
  auto wanted = [&](int c) { return only.empty() || only.count(c) > 0; };

  int failures = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, "projection exactness", projection_exactness);
  guarded(2, "geometry oracle", geometry_oracle);
  guarded(3, "scl correctness", scl_correctness);
  guarded(4, "sav fixed point", sav_fixed_point);
  guarded(5, "gradient correctness", gradient_correctness);

  if (wanted(6) || wanted(7) || wanted(8) || wanted(9)) {
    std::cerr << "training the default configuration (this takes a while)\n";
    const FullRun run = full_pipeline(workdir);
    guarded(6, "forecast ordering", [&] { return forecast_ordering(run); });
    guarded(7, "motion refinement", [&] { return motion_refinement(run); });
    guarded(8, "planning safety", [&] { return planning_safety(run); });
    guarded(9, "ablation monotonicity", [&] { return ablation_monotonicity(run); });
  }

  guarded(10, "determinism", [&] {
    if (cli.empty()) return Outcome{false, "--cli not given"};
    return determinism(fs::absolute(cli), fs::absolute(workdir));
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
