#include "sparseworld/memory.hpp"

#include <string>

#include <nlohmann/json.hpp>

#include "sparseworld/errors.hpp"
#include "sparseworld/serialize.hpp"

namespace sparseworld {

InstanceMemoryQueue::InstanceMemoryQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ValidationError("instance memory queue capacity must be positive");
}

InstanceMemoryQueue InstanceMemoryQueue::for_rollout(const RolloutConfig& config) {
  config.validate();
  return InstanceMemoryQueue(static_cast<std::size_t>(config.history + config.forecast + 1));
}

void InstanceMemoryQueue::push(InstanceSet frame) {
  if (!frames_.empty() && frame.frame_index != frames_.back().frame_index + 1) {
    throw NonContiguousFrame("expected frame " + std::to_string(frames_.back().frame_index + 1) +
                             ", got " + std::to_string(frame.frame_index));
  }
  frames_.push_back(std::move(frame));
  while (frames_.size() > capacity_) frames_.pop_front();
}

bool InstanceMemoryQueue::contains(std::int64_t frame_index) const noexcept {
  return !frames_.empty() && frame_index >= frames_.front().frame_index &&
         frame_index <= frames_.back().frame_index;
}

const InstanceSet& InstanceMemoryQueue::at(std::int64_t frame_index) const {
  if (!contains(frame_index)) {
    throw InsufficientHistory("frame " + std::to_string(frame_index) + " not in memory");
  }
  return frames_[static_cast<std::size_t>(frame_index - frames_.front().frame_index)];
}

void InstanceMemoryQueue::set_ego(std::int64_t frame_index, const EgoAnchor& ego) {
  (void)at(frame_index);
  frames_[static_cast<std::size_t>(frame_index - frames_.front().frame_index)].ego = ego;
}

std::int64_t InstanceMemoryQueue::newest_index() const {
  if (frames_.empty()) throw InsufficientHistory("memory queue is empty");
  return frames_.back().frame_index;
}

std::int64_t InstanceMemoryQueue::oldest_index() const {
  if (frames_.empty()) throw InsufficientHistory("memory queue is empty");
  return frames_.front().frame_index;
}

std::vector<InstanceSet> InstanceMemoryQueue::window(std::int64_t t, int m) const {
  if (m < 0) throw ValidationError("window length must be non-negative");
  if (!contains(t) || !contains(t - m)) {
    throw InsufficientHistory("window [" + std::to_string(t - m) + ", " + std::to_string(t) +
                              "] not fully stored");
  }
  std::vector<InstanceSet> out;
  out.reserve(static_cast<std::size_t>(m) + 1);
  for (std::int64_t k = t - m; k <= t; ++k) out.push_back(at(k));
  return out;
}

int fill_with_padding(InstanceMemoryQueue& queue, const std::vector<InstanceSet>& history, int m) {
  if (history.empty()) throw InsufficientHistory("no history frames to fill the queue");
  const int available = static_cast<int>(history.size()) - 1;
  const int padding = available >= m ? 0 : m - available;
  const InstanceSet& oldest = history.front();
  for (int k = padding; k > 0; --k) {
    InstanceSet copy = oldest;
    copy.frame_index = oldest.frame_index - k;
    queue.push(std::move(copy));
  }
  for (const auto& frame : history) queue.push(frame);
  return padding;
}

void to_json(nlohmann::json& j, const InstanceMemoryQueue& q) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : q.frames()) frames.push_back(f);
  j = nlohmann::json{{"capacity", q.capacity()}, {"frames", std::move(frames)}};
}

InstanceMemoryQueue queue_from_json(const nlohmann::json& j) {
  InstanceMemoryQueue q(j.at("capacity").get<std::size_t>());
  for (const auto& f : j.at("frames")) q.push(f.get<InstanceSet>());
  return q;
}

}  // namespace sparseworld
