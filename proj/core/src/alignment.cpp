#include "sparseworld/alignment.hpp"

#include <cmath>

#include "sparseworld/errors.hpp"

namespace sparseworld {

void EgoMotionStep::validate() const {
  if (!(dt > 0.0)) throw ValidationError("ego motion step requires dt > 0");
  if (!(std::abs(yaw_change) < kPi)) throw ValidationError("ego yaw change must satisfy |w dt| < pi");
}

EgoMotionStep arc_step(double v, double omega, double dt) noexcept {
  const double yaw = omega * dt;
  if (std::abs(yaw) < 1e-12) return {{v * dt, 0.0}, yaw, dt};
  const double radius = v / omega;
  return {{radius * std::sin(yaw), radius * (1.0 - std::cos(yaw))}, yaw, dt};
}

EgoMotionStep step_from_condition(const EgoAnchor& ego, const ActionCondition& condition, double dt) {
  if (condition.planned.waypoints.empty()) throw ValidationError("action condition has an empty plan");
  EgoMotionStep step{condition.planned.waypoints.front(), ego.angular_velocity * dt, dt};
  step.validate();
  return step;
}

Vec3 velocity_compensate(const AgentAnchor& anchor, double dt) noexcept {
  return anchor.center + anchor.velocity * dt;
}

Vec2 ego_align(const Vec2& point, const EgoMotionStep& step) noexcept {
  return rotate2d(point - step.displacement, -step.yaw_change);
}

Vec3 ego_align(const Vec3& point, const EgoMotionStep& step) noexcept {
  const Vec2 xy = ego_align(Vec2{point.x(), point.y()}, step);
  return {xy.x(), xy.y(), point.z()};
}

Heading heading_align(const Heading& heading, const EgoMotionStep& step) noexcept {
  const double c = std::cos(step.yaw_change);
  const double s = std::sin(step.yaw_change);
  // Rotation by -yaw_change.
  return {c * heading.sin - s * heading.cos, c * heading.cos + s * heading.sin};
}

Vec3 velocity_align(const Vec3& velocity, const EgoMotionStep& step) noexcept {
  const Vec2 xy = rotate2d(Vec2{velocity.x(), velocity.y()}, -step.yaw_change);
  return {xy.x(), xy.y(), velocity.z()};
}

AgentAnchor project_agent(const AgentAnchor& anchor, const EgoMotionStep& step) noexcept {
  AgentAnchor out = anchor;
  out.center = ego_align(velocity_compensate(anchor, step.dt), step);
  out.heading = heading_align(anchor.heading, step);
  out.velocity = velocity_align(anchor.velocity, step);
  return out;
}

MapAnchor project_map(const MapAnchor& anchor, const EgoMotionStep& step) {
  MapAnchor out = anchor;
  for (auto& p : out.points) p = ego_align(p, step);
  return out;
}

InstanceSet project_instances(const InstanceSet& frame, const EgoMotionStep& step) {
  InstanceSet out = frame;
  out.frame_index = frame.frame_index + 1;
  for (auto& agent : out.agents) agent.anchor = project_agent(agent.anchor, step);
  for (auto& map : out.maps) map.anchor = project_map(map.anchor, step);
  return out;
}

}  // namespace sparseworld
