#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "sparseworld/dreamer.hpp"
#include "sparseworld/errors.hpp"
#include "sparseworld/motion.hpp"

namespace sw = sparseworld;

namespace {

sw::MotionConfig tiny_config(std::uint64_t seed = 4) {
  sw::MotionConfig c;
  c.blocks = 2;
  c.heads = 2;
  c.width = 8;
  c.seed = seed;
  return c;
}

void jitter(sw::MotionParams& p, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  Eigen::VectorXd flat = p.weights().to_flat();
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] += normal(rng);
  p.weights().from_flat(flat);
}

sw::Trajectory straight(double speed, int steps = 6) {
  sw::Trajectory t;
  for (int k = 1; k <= steps; ++k) t.waypoints.emplace_back(speed * 0.5 * k, 0.0);
  return t;
}

double max_gap(const sw::MotionOutput& a, const sw::MotionOutput& b) {
  double gap = 0.0;
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    for (std::size_t k = 0; k < a.agents[i].modes.size(); ++k) {
      for (std::size_t s = 0; s < a.agents[i].modes[k].steps(); ++s) {
        gap = std::max(gap, (a.agents[i].modes[k].waypoints[s] - b.agents[i].modes[k].waypoints[s]).norm());
      }
      gap = std::max(gap, std::abs(a.agents[i].scores[k] - b.agents[i].scores[k]));
    }
  }
  for (std::size_t s = 0; s < a.ego.steps(); ++s) gap = std::max(gap, (a.ego.waypoints[s] - b.ego.waypoints[s]).norm());
  return gap;
}

}  // namespace

TEST(PredictMotion, ZeroHeadsAreStationary) {
  sw::MotionParams p(tiny_config());
  p.zero_trajectory_heads();
  const auto sc = sw::generate({.seed = 3});
  const auto frames = sw::history_frames(sc, 6, 3);
  const auto out = sw::predict_motion(frames, p);
  ASSERT_EQ(out.agents.size(), frames.front().agents.size());
  for (std::size_t i = 0; i < out.agents.size(); ++i) {
    const auto& a = frames.front().agents[i].anchor;
    if (!sw::slot_active(a)) {
      EXPECT_TRUE(out.agents[i].modes.empty());
      continue;
    }
    ASSERT_EQ(out.agents[i].modes.size(), 6u);
    for (const auto& mode : out.agents[i].modes) {
      for (const auto& w : mode.waypoints) EXPECT_EQ(w, a.center.head<2>());
    }
  }
  for (const auto& w : out.ego.waypoints) EXPECT_TRUE(w.isZero());
}

TEST(PredictMotion, SlotPermutationPermutesOutputs) {
  sw::MotionParams p(tiny_config());
  jitter(p, 0.1, 1);
  const auto sc = sw::generate({.seed = 4});
  auto frames = sw::history_frames(sc, 8, 3);
  const auto base = sw::predict_motion(frames, p);
  const std::size_t n = frames.front().agents.size();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = (i * 7 + 3) % n;
  for (auto& f : frames) {
    auto agents = f.agents;
    for (std::size_t i = 0; i < n; ++i) f.agents[i] = agents[perm[i]];
  }
  const auto permuted = sw::predict_motion(frames, p);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = permuted.agents[i];
    const auto& y = base.agents[perm[i]];
    ASSERT_EQ(x.modes.size(), y.modes.size());
    for (std::size_t k = 0; k < x.modes.size(); ++k) {
      EXPECT_NEAR(x.scores[k], y.scores[k], 1e-9);
      for (std::size_t s = 0; s < x.modes[k].steps(); ++s) {
        EXPECT_NEAR((x.modes[k].waypoints[s] - y.modes[k].waypoints[s]).norm(), 0.0, 1e-9);
      }
    }
  }
  for (std::size_t s = 0; s < base.ego.steps(); ++s) {
    EXPECT_NEAR((base.ego.waypoints[s] - permuted.ego.waypoints[s]).norm(), 0.0, 1e-9);
  }
}

TEST(PredictMotion, BrokenFrameChainThrows) {
  sw::MotionParams p(tiny_config());
  const auto sc = sw::generate({.seed = 4});
  auto frames = sw::history_frames(sc, 8, 3);
  frames.erase(frames.begin() + 1);
  EXPECT_THROW((void)sw::predict_motion(frames, p), sw::ShapeMismatch);
}

TEST(ToActionCondition, Examples) {
  sw::Trajectory zero;
  zero.waypoints.assign(6, sw::Vec2::Zero());
  const auto z = sw::to_action_condition(zero, 4.0);
  EXPECT_EQ(z.speed, 0.0);
  EXPECT_EQ(z.steering, sw::Steering::kStraight);

  const auto s = sw::to_action_condition(straight(10.0), 0.0);
  EXPECT_NEAR(s.speed, 10.0, 1e-9);
  EXPECT_EQ(s.steering, sw::Steering::kStraight);

  sw::Trajectory arc;
  for (int k = 1; k <= 6; ++k) {
    const double phi = 0.05 * 5.0 * k;
    arc.waypoints.emplace_back(20.0 * std::sin(phi), 20.0 * (1.0 - std::cos(phi)));
  }
  EXPECT_EQ(sw::to_action_condition(arc, 0.0).steering, sw::Steering::kLeft);
}

TEST(RefineMotion, HistoryAsFuturesMatchesBaseline) {
  sw::MotionParams p(tiny_config());
  jitter(p, 0.1, 2);
  const auto sc = sw::generate({.seed = 5});
  const auto frames = sw::history_frames(sc, 7, 3);
  const std::vector<sw::InstanceSet> rest(frames.begin() + 1, frames.end());
  EXPECT_EQ(max_gap(sw::refine_motion(frames.front(), rest, p), sw::predict_motion(frames, p)), 0.0);
}

TEST(RefineMotion, EmptySlotsAreMasked) {
  sw::MotionParams p(tiny_config());
  jitter(p, 0.1, 3);
  const auto sc = sw::generate({.seed = 6, .n_agents = 4});
  const auto cur = sw::ego_frame_view(sc, 6).first;
  auto futures = sw::ground_truth_future(sc, 6, 4);
  const auto ref = sw::refine_motion(cur, futures, p);
  for (auto& f : futures) {
    for (auto& a : f.agents) {
      if (a.anchor.id != sw::kEmptySlot) continue;
      a.anchor.center = {17.0, -4.0, 0.0};
      a.anchor.velocity = {3.0, 1.0, 0.0};
      a.feature = Eigen::VectorXd::Constant(8, 5.0);
    }
  }
  EXPECT_EQ(max_gap(sw::refine_motion(cur, futures, p), ref), 0.0);
}

TEST(MotionMetrics, PerfectPrediction) {
  sw::Trajectory gt = straight(4.0);
  sw::MultiModalTrajectory m;
  m.modes = {gt};
  m.scores = {1.0};
  const auto r = sw::motion_metrics({{1, {0, 0}, m}}, {{1, {0, 0}, gt}});
  EXPECT_EQ(r.min_ade, 0.0);
  EXPECT_EQ(r.min_fde, 0.0);
  EXPECT_EQ(r.miss_rate, 0.0);
  EXPECT_EQ(r.epa, 1.0);
}

TEST(MotionMetrics, FinalErrorBeyondThresholdIsMiss) {
  const sw::Trajectory gt = straight(4.0);
  sw::Trajectory off = gt;
  off.waypoints.back().y() += 3.0;
  sw::MultiModalTrajectory m;
  m.modes = {off};
  m.scores = {1.0};
  const auto r = sw::motion_metrics({{1, {0, 0}, m}}, {{1, {0, 0}, gt}});
  EXPECT_NEAR(r.min_fde, 3.0, 1e-12);
  EXPECT_EQ(r.miss_rate, 1.0);
}

TEST(MotionMetrics, EpaCountsHitsAndFalsePositives) {
  // 10 ground-truth agents, 9 matched (7 hits, 2 misses), 2 false positives.
  std::vector<sw::AgentTruth> truth;
  std::vector<sw::AgentPrediction> preds;
  for (int i = 0; i < 10; ++i) {
    const sw::Vec2 pos{10.0 * i, 0.0};
    sw::Trajectory gt;
    for (int k = 1; k <= 6; ++k) gt.waypoints.push_back(pos + sw::Vec2{2.0 * k, 0.0});
    truth.push_back({i, pos, gt});
    if (i == 9) continue;
    sw::Trajectory pred = gt;
    if (i >= 7) pred.waypoints.back().y() += 5.0;
    sw::MultiModalTrajectory m;
    m.modes = {pred};
    m.scores = {1.0};
    preds.push_back({i, pos, m});
  }
  sw::MultiModalTrajectory ghost;
  ghost.modes = {straight(1.0)};
  ghost.scores = {1.0};
  preds.push_back({100, {0.0, 50.0}, ghost});
  preds.push_back({101, {0.0, 60.0}, ghost});
  const auto r = sw::motion_metrics(preds, truth);
  EXPECT_EQ(r.matched, 9);
  EXPECT_EQ(r.hits, 7);
  EXPECT_EQ(r.false_positives, 2);
  EXPECT_NEAR(r.epa, 0.6, 1e-12);
  EXPECT_NEAR(r.miss_rate, 2.0 / 9.0, 1e-12);
}

TEST(MotionMetrics, EmptyGroundTruthThrows) {
  EXPECT_THROW((void)sw::motion_metrics({}, {}), sw::EmptyGroundTruth);
}

TEST(MotionMetrics, AccumulatorMatchesSingleCall) {
  const sw::Trajectory gt = straight(4.0);
  sw::MultiModalTrajectory m;
  sw::Trajectory off = gt;
  for (auto& w : off.waypoints) w.y() += 1.0;
  m.modes = {off};
  m.scores = {1.0};
  const auto one = sw::motion_metrics({{1, {0, 0}, m}}, {{1, {0, 0}, gt}});
  sw::MotionMetricsAccumulator acc;
  acc.add(one);
  acc.add(one);
  const auto both = acc.result();
  EXPECT_NEAR(both.min_ade, one.min_ade, 1e-12);
  EXPECT_EQ(both.ground_truth, 2);
}

TEST(MotionLoss, GradientMatchesFiniteDifferences) {
  sw::MotionParams p(tiny_config());
  jitter(p, 0.05, 4);
  const auto sc = sw::generate({.seed = 9});
  const auto sample = sw::motion_sample(sc, 8, sw::history_frames(sc, 8, 3));
  sw::nn::Gradients grad = p.weights().zero_gradients();
  sw::motion_loss(sample, p, false, 1.0, {}, &grad);
  const auto check = oracle::check_gradient(
      p.weights(), [&] { return sw::motion_loss(sample, p, false, 1.0, {}, nullptr).total; }, sw::nn::flatten(grad),
      40, 5);
  EXPECT_LT(check.max_relative_error, 1e-4);
}

TEST(MotionLoss, SafetyPhaseTouchesOnlyTheSafetyHead) {
  sw::MotionParams p(tiny_config());
  jitter(p, 0.05, 6);
  p.reset_scl_head();
  const auto sc = sw::generate({.seed = 10, .n_crossing = 2});
  std::vector<sw::MotionSample> samples;
  for (int t = 4; t <= 16; t += 4) samples.push_back(sw::motion_sample(sc, t, sw::history_frames(sc, t, 3)));
  const Eigen::VectorXd before = p.weights().to_flat();
  sw::MotionTrainOptions opt;
  opt.epochs = 2;
  opt.adam = true;
  opt.scl_phase = true;
  sw::train_motion(p, samples, opt);
  const auto& w = p.weights();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < w.count(); ++i) {
    const auto n = static_cast<Eigen::Index>(w.value(i).size());
    const Eigen::VectorXd now = Eigen::Map<const Eigen::VectorXd>(w.value(i).data(), n);
    const bool changed = now != before.segment(static_cast<Eigen::Index>(offset), n);
    if (w.name(i).rfind("motion.head.plan_scl", 0) != 0) EXPECT_FALSE(changed) << w.name(i);
    offset += static_cast<std::size_t>(n);
  }
}

TEST(MotionTraining, ReducesImitationLoss) {
  sw::MotionParams p(tiny_config());
  std::vector<sw::MotionSample> samples;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto sc = sw::generate({.seed = 200 + s});
    for (int t = 4; t <= 16; t += 3) samples.push_back(sw::motion_sample(sc, t, sw::history_frames(sc, t, 3)));
  }
  sw::MotionTrainOptions opt;
  opt.epochs = 5;
  opt.adam = true;
  opt.learning_rate = 3e-3;
  const auto losses = sw::train_motion(p, samples, opt);
  ASSERT_EQ(losses.size(), 5u);
  EXPECT_LT(losses.back(), losses.front());
}

TEST(MotionParamsJson, RoundTrip) {
  sw::MotionParams p(tiny_config());
  const nlohmann::json j = p;
  const auto back = sw::motion_from_json(j);
  EXPECT_EQ(back.weights().to_flat(), p.weights().to_flat());
}
