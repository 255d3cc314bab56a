#pragma once

// Global instance alignment: closed-form projection of anchors from the
// frame-t ego frame into the frame-(t+1) ego frame.
//
//   ce' = Rz(-w dt) * (ce + V dt - (dx, dy, 0))
//
// Agents advance by their own velocity first, then every point is
// re-expressed relative to the moved ego. Map points skip the velocity term.

#include "sparseworld/scene.hpp"

namespace sparseworld {

/// Ego motion between consecutive frames, expressed in the earlier frame.
struct EgoMotionStep {
  Vec2 displacement{Vec2::Zero()};
  double yaw_change{0.0};
  double dt{0.5};

  /// Throws ValidationError unless dt > 0 and |yaw_change| < pi.
  void validate() const;
  /// Pose of the later ego frame inside the earlier one.
  [[nodiscard]] Pose2D pose() const noexcept { return {displacement.x(), displacement.y(), yaw_change}; }
};

/// Step of a unicycle holding speed `v` and yaw rate `omega` for `dt`.
EgoMotionStep arc_step(double v, double omega, double dt) noexcept;

/// Step implied by an action condition: displacement is the first planned
/// waypoint, yaw change is the ego angular velocity times dt.
EgoMotionStep step_from_condition(const EgoAnchor& ego, const ActionCondition& condition, double dt);

Vec3 velocity_compensate(const AgentAnchor& anchor, double dt) noexcept;
Vec3 ego_align(const Vec3& point, const EgoMotionStep& step) noexcept;
Vec2 ego_align(const Vec2& point, const EgoMotionStep& step) noexcept;
Heading heading_align(const Heading& heading, const EgoMotionStep& step) noexcept;
Vec3 velocity_align(const Vec3& velocity, const EgoMotionStep& step) noexcept;

AgentAnchor project_agent(const AgentAnchor& anchor, const EgoMotionStep& step) noexcept;
MapAnchor project_map(const MapAnchor& anchor, const EgoMotionStep& step);

/// Projects every agent and map anchor of `frame` one step ahead. Features,
/// ids, slot order and the ego anchor are carried over unchanged; the
/// frame index advances by one.
InstanceSet project_instances(const InstanceSet& frame, const EgoMotionStep& step);

}  // namespace sparseworld
