#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "sparseworld/errors.hpp"
#include "sparseworld/memory.hpp"

namespace sw = sparseworld;

namespace {

sw::InstanceSet frame(std::int64_t index) {
  sw::InstanceSet s;
  s.frame_index = index;
  sw::AgentInstance a;
  a.anchor.id = 1;
  a.anchor.center = {static_cast<double>(index), 0.0, 0.0};
  a.anchor.existence = 1.0;
  s.agents.push_back(a);
  return s;
}

}  // namespace

TEST(Queue, PushIntoEmpty) {
  sw::InstanceMemoryQueue q(7);
  q.push(frame(0));
  EXPECT_EQ(q.size(), 1u);
  EXPECT_EQ(q.newest_index(), 0);
}

TEST(Queue, EvictsOldestWhenFull) {
  sw::InstanceMemoryQueue q(7);
  for (int i = 0; i < 8; ++i) q.push(frame(i));
  EXPECT_EQ(q.size(), 7u);
  EXPECT_EQ(q.oldest_index(), 1);
  EXPECT_FALSE(q.contains(0));
}

TEST(Queue, RejectsGaps) {
  sw::InstanceMemoryQueue q(7);
  q.push(frame(3));
  EXPECT_THROW(q.push(frame(5)), sw::NonContiguousFrame);
  EXPECT_THROW(q.push(frame(3)), sw::NonContiguousFrame);
}

TEST(Queue, WindowSlices) {
  sw::InstanceMemoryQueue q(9);
  for (int i = 0; i < 5; ++i) q.push(frame(i));
  const auto w0 = q.window(4, 0);
  ASSERT_EQ(w0.size(), 1u);
  EXPECT_EQ(w0[0].frame_index, 4);
  const auto w2 = q.window(4, 2);
  ASSERT_EQ(w2.size(), 3u);
  EXPECT_EQ(w2[0].frame_index, 2);
  EXPECT_EQ(w2[2].frame_index, 4);
}

TEST(Queue, WindowNeedsHistory) {
  sw::InstanceMemoryQueue q(9);
  q.push(frame(0));
  q.push(frame(1));
  EXPECT_THROW((void)q.window(1, 3), sw::InsufficientHistory);
}

TEST(Queue, RolloutCapacity) {
  EXPECT_EQ(sw::InstanceMemoryQueue::for_rollout({4, 4, 3, 0.5}).capacity(), 9u);
}

TEST(Queue, SetEgoReplacesOnlyEgo) {
  sw::InstanceMemoryQueue q(3);
  q.push(frame(0));
  sw::EgoAnchor e;
  e.velocity = {3.0, 0.0, 0.0};
  q.set_ego(0, e);
  EXPECT_EQ(q.at(0).ego, e);
  EXPECT_EQ(q.at(0).agents[0].anchor.center.x(), 0.0);
}

TEST(Queue, PaddingRepeatsOldestFrame) {
  sw::InstanceMemoryQueue q(9);
  const int padded = sw::fill_with_padding(q, {frame(0), frame(1)}, 3);
  EXPECT_EQ(padded, 2);
  const auto w = q.window(1, 3);
  ASSERT_EQ(w.size(), 4u);
  EXPECT_EQ(w[0].frame_index, -2);
  EXPECT_EQ(w[0].agents[0].anchor, w[2].agents[0].anchor);
}

TEST(Queue, JsonRoundTrip) {
  sw::InstanceMemoryQueue q(4);
  for (int i = 2; i < 5; ++i) q.push(frame(i));
  const nlohmann::json j = q;
  const auto back = sw::queue_from_json(j);
  EXPECT_EQ(back.capacity(), 4u);
  EXPECT_EQ(back.size(), 3u);
  EXPECT_EQ(nlohmann::json(back), j);
}
