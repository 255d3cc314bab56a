#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sparseworld/scene.hpp"

namespace sparseworld {

/// Bounded cache of historical and predicted frames, indexed contiguously by
/// frame_index. Pushing past capacity evicts the oldest frame.
class InstanceMemoryQueue {
 public:
  explicit InstanceMemoryQueue(std::size_t capacity);
  /// Capacity h + f + 1.
  static InstanceMemoryQueue for_rollout(const RolloutConfig& config);

  /// Throws NonContiguousFrame unless the queue is empty or the frame index
  /// is exactly newest + 1.
  void push(InstanceSet frame);

  /// Frames [t - m, ..., t] in ascending order. Throws InsufficientHistory
  /// when any of them is not stored.
  [[nodiscard]] std::vector<InstanceSet> window(std::int64_t t, int m) const;

  [[nodiscard]] const InstanceSet& at(std::int64_t frame_index) const;
  /// Replaces the ego anchor of a stored frame. Rollouts use this once the
  /// planner has decided the ego controls for a predicted frame.
  void set_ego(std::int64_t frame_index, const EgoAnchor& ego);
  [[nodiscard]] bool contains(std::int64_t frame_index) const noexcept;
  [[nodiscard]] std::int64_t newest_index() const;
  [[nodiscard]] std::int64_t oldest_index() const;
  [[nodiscard]] std::size_t size() const noexcept { return frames_.size(); }
  [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
  [[nodiscard]] bool empty() const noexcept { return frames_.empty(); }
  [[nodiscard]] const std::deque<InstanceSet>& frames() const noexcept { return frames_; }

 private:
  std::size_t capacity_;
  std::deque<InstanceSet> frames_;
};

/// Fills a fresh queue with `history`, prepending copies of the oldest frame
/// (re-indexed) until frames t - m ... t exist. Returns the number of padded
/// frames.
int fill_with_padding(InstanceMemoryQueue& queue, const std::vector<InstanceSet>& history, int m);

void to_json(nlohmann::json& j, const InstanceMemoryQueue& q);
InstanceMemoryQueue queue_from_json(const nlohmann::json& j);

}  // namespace sparseworld
