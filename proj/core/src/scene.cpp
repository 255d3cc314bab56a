#include "sparseworld/scene.hpp"

#include <cmath>
#include <string>

#include "sparseworld/errors.hpp"

namespace sparseworld {

Heading Heading::from_angle(double yaw) noexcept { return {std::sin(yaw), std::cos(yaw)}; }

double Heading::angle() const noexcept { return std::atan2(sin, cos); }

Heading normalize_heading(double sin_raw, double cos_raw) {
  const double norm = std::hypot(sin_raw, cos_raw);
  if (!(norm >= 1e-12)) {
    throw DegenerateHeading("heading vector norm " + std::to_string(norm) + " below 1e-12");
  }
  return {sin_raw / norm, cos_raw / norm};
}

std::string_view to_string(AgentClass c) noexcept {
  switch (c) {
    case AgentClass::kVehicle: return "vehicle";
    case AgentClass::kPedestrian: return "pedestrian";
    case AgentClass::kCyclist: return "cyclist";
  }
  return "vehicle";
}

std::string_view to_string(MapClass c) noexcept {
  switch (c) {
    case MapClass::kLaneDivider: return "lane-divider";
    case MapClass::kBoundary: return "boundary";
    case MapClass::kCrossing: return "crossing";
  }
  return "lane-divider";
}

std::string_view to_string(Steering s) noexcept {
  switch (s) {
    case Steering::kLeft: return "left";
    case Steering::kStraight: return "straight";
    case Steering::kRight: return "right";
  }
  return "straight";
}

AgentClass agent_class_from_string(std::string_view s) {
  if (s == "vehicle") return AgentClass::kVehicle;
  if (s == "pedestrian") return AgentClass::kPedestrian;
  if (s == "cyclist") return AgentClass::kCyclist;
  throw ValidationError("unknown agent class '" + std::string(s) + "'");
}

MapClass map_class_from_string(std::string_view s) {
  if (s == "lane-divider") return MapClass::kLaneDivider;
  if (s == "boundary") return MapClass::kBoundary;
  if (s == "crossing") return MapClass::kCrossing;
  throw ValidationError("unknown map class '" + std::string(s) + "'");
}

Steering steering_from_string(std::string_view s) {
  if (s == "left") return Steering::kLeft;
  if (s == "straight") return Steering::kStraight;
  if (s == "right") return Steering::kRight;
  throw ValidationError("unknown steering command '" + std::string(s) + "'");
}

std::size_t MultiModalTrajectory::best() const {
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  return best;
}

void RolloutConfig::validate() const {
  if (history < 1) throw ValidationError("history length h must be >= 1");
  if (forecast < 1) throw ValidationError("forecast horizon f must be >= 1");
  if (window < 1 || window > history) throw ValidationError("window m must satisfy 1 <= m <= h");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
}

double mean_signed_curvature(const Trajectory& trajectory) {
  std::vector<Vec2> pts;
  pts.reserve(trajectory.waypoints.size() + 1);
  pts.emplace_back(0.0, 0.0);
  pts.insert(pts.end(), trajectory.waypoints.begin(), trajectory.waypoints.end());
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Vec2 ab = pts[i] - pts[i - 1];
    const Vec2 bc = pts[i + 1] - pts[i];
    const Vec2 ac = pts[i + 1] - pts[i - 1];
    const double denom = ab.norm() * bc.norm() * ac.norm();
    if (ab.norm() < 1e-9 || bc.norm() < 1e-9 || ac.norm() < 1e-9) continue;
    const double cross = ab.x() * bc.y() - ab.y() * bc.x();
    sum += 2.0 * cross / denom;
    ++count;
  }
  return count == 0 ? 0.0 : sum / count;
}

Steering steering_from_curvature(double curvature) noexcept {
  if (curvature > kSteeringCurvatureThreshold) return Steering::kLeft;
  if (curvature < -kSteeringCurvatureThreshold) return Steering::kRight;
  return Steering::kStraight;
}

Vec2 rotate2d(const Vec2& v, double angle) noexcept {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

Vec2 Pose2D::rotate(const Vec2& v) const noexcept { return rotate2d(v, yaw); }

Vec2 Pose2D::apply(const Vec2& p) const noexcept { return rotate(p) + Vec2{x, y}; }

Pose2D Pose2D::inverse() const noexcept {
  const Vec2 t = rotate2d(Vec2{-x, -y}, -yaw);
  return {t.x(), t.y(), -yaw};
}

Pose2D Pose2D::compose(const Pose2D& child) const noexcept {
  const Vec2 t = apply(Vec2{child.x, child.y});
  return {t.x(), t.y(), yaw + child.yaw};
}

Heading Pose2D::heading_of(const Heading& child) const noexcept {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {s * child.cos + c * child.sin, c * child.cos - s * child.sin};
}

InstanceSet transform_instances(const InstanceSet& frame, const Pose2D& parent_from_child) {
  InstanceSet out = frame;
  for (auto& agent : out.agents) {
    auto& a = agent.anchor;
    const Vec2 c = parent_from_child.apply(a.center.head<2>());
    a.center.head<2>() = c;
    a.velocity.head<2>() = parent_from_child.rotate(a.velocity.head<2>());
    a.heading = parent_from_child.heading_of(a.heading);
  }
  for (auto& map : out.maps) {
    for (auto& p : map.anchor.points) p = parent_from_child.apply(p);
  }
  return out;
}

AgentInstance empty_agent_slot() { return {}; }

MapInstance empty_map_slot(int points) {
  MapInstance m;
  m.anchor.points.reserve(points);
  // Distinct collinear points keep the polyline invariant valid for empty slots.
  for (int i = 0; i < points; ++i) m.anchor.points.emplace_back(static_cast<double>(i), 0.0);
  return m;
}

}  // namespace sparseworld
