#include <random>

#include <benchmark/benchmark.h>

#include "sparseworld/alignment.hpp"
#include "sparseworld/dreamer.hpp"
#include "sparseworld/safety.hpp"
#include "sparseworld/world.hpp"

namespace sw = sparseworld;

namespace {

sw::DecoderInput input_for(const sw::Scenario& sc, int t, int window) {
  const sw::InstanceMemoryQueue q = sw::observed_queue(sc, t, sw::RolloutConfig{});
  sw::DecoderInput in;
  in.window = q.window(t, window);
  in.condition = sw::scripted_condition(sc, t);
  in.projected = sw::project_instances(in.window.back(),
                                       sw::step_from_condition(in.window.back().ego, in.condition, sc.config.dt));
  return in;
}

// One decoder step with `range(0)` agent slots, 8 of them occupied.
void BM_DecoderStep(benchmark::State& state) {
  sw::ScenarioConfig sc;
  sc.seed = 1;
  sc.agent_slots = static_cast<int>(state.range(0));
  const auto scenario = sw::generate(sc);
  sw::DreamerConfig dc;
  dc.seed = 2;
  const sw::DreamerParams params(dc);
  const auto in = input_for(scenario, 8, dc.window);
  for (auto _ : state) benchmark::DoNotOptimize(sw::decoder_step(in, params));
}
BENCHMARK(BM_DecoderStep)->Arg(32)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ProjectInstances(benchmark::State& state) {
  const auto scenario = sw::generate({.seed = 3});
  const auto view = sw::ego_frame_view(scenario, 6).first;
  const auto step = sw::frame_step(view.ego, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(sw::project_instances(view, step));
}
BENCHMARK(BM_ProjectInstances);

void BM_MinDistance(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(-4.0, 4.0), yaw(-sw::kPi, sw::kPi);
  std::vector<sw::OrientedBox2D> boxes(64);
  for (auto& b : boxes) {
    b.center = {pos(rng), pos(rng)};
    b.half_extents = {2.2, 0.9};
    b.heading = sw::Heading::from_angle(yaw(rng));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sw::min_distance_vector(boxes[i % 64], boxes[(i + 7) % 64]));
    ++i;
  }
}
BENCHMARK(BM_MinDistance);

void BM_Sav(benchmark::State& state) {
  sw::ScenarioConfig sc;
  sc.seed = 5;
  sc.n_crossing = 2;
  const auto scenario = sw::generate(sc);
  const auto [view, cond] = sw::ego_frame_view(scenario, 6);
  const auto futures = sw::agent_futures_in_frame(scenario, 6, static_cast<int>(cond.planned.steps()));
  std::vector<sw::AgentAnchor> agents;
  std::vector<sw::Trajectory> trajs;
  for (std::size_t i = 0; i < view.agents.size(); ++i) {
    if (!sw::slot_active(view.agents[i].anchor)) continue;
    agents.push_back(view.agents[i].anchor);
    trajs.push_back(futures[i]);
  }
  const sw::SafetyConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(sw::sav(cond.planned, agents, trajs, config, view.ego));
}
BENCHMARK(BM_Sav);

}  // namespace

BENCHMARK_MAIN();
