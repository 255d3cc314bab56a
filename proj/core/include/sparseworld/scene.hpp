#pragma once

// Sparse scene representation: anchors, per-instance features, frames and
// the rigid 2D transforms that move them between ego frames.
//
// Frame convention: X forward, Y left, Z up, yaw counterclockwise from +X.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace sparseworld {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;

/// Planning horizon and map polyline width used throughout the desk-scale setup.
inline constexpr int kPlanningSteps = 6;
inline constexpr int kMapPoints = 20;
inline constexpr int kDefaultAgentSlots = 32;
inline constexpr int kDefaultMapSlots = 8;

/// Yaw stored as a unit (sin, cos) pair.
struct Heading {
  double sin{0.0};
  double cos{1.0};

  static Heading from_angle(double yaw) noexcept;
  [[nodiscard]] double angle() const noexcept;
  [[nodiscard]] Vec2 direction() const noexcept { return {cos, sin}; }

  friend bool operator==(const Heading&, const Heading&) = default;
};

/// Scales (sin_raw, cos_raw) to unit length. Throws DegenerateHeading when
/// the input norm is below 1e-12.
Heading normalize_heading(double sin_raw, double cos_raw);

enum class AgentClass : std::uint8_t { kVehicle, kPedestrian, kCyclist };
enum class MapClass : std::uint8_t { kLaneDivider, kBoundary, kCrossing };
enum class Steering : std::uint8_t { kLeft, kStraight, kRight };

inline constexpr int kAgentClassCount = 3;
inline constexpr int kMapClassCount = 3;
inline constexpr int kSteeringCount = 3;

std::string_view to_string(AgentClass c) noexcept;
std::string_view to_string(MapClass c) noexcept;
std::string_view to_string(Steering s) noexcept;
AgentClass agent_class_from_string(std::string_view s);
MapClass map_class_from_string(std::string_view s);
Steering steering_from_string(std::string_view s);

inline constexpr std::int64_t kEmptySlot = -1;

struct AgentAnchor {
  std::int64_t id{kEmptySlot};
  Vec3 center{Vec3::Zero()};
  Vec3 size{1.0, 1.0, 1.0};  // (w, l, h)
  Heading heading{};
  Vec3 velocity{Vec3::Zero()};
  AgentClass class_label{AgentClass::kVehicle};
  double existence{0.0};

  [[nodiscard]] double width() const noexcept { return size.x(); }
  [[nodiscard]] double length() const noexcept { return size.y(); }
  [[nodiscard]] bool present() const noexcept { return existence >= 0.5; }

  friend bool operator==(const AgentAnchor&, const AgentAnchor&) = default;
};

/// Ego anchor, always at the origin of its own frame facing +X.
struct EgoAnchor {
  Vec3 center{Vec3::Zero()};
  Vec3 size{1.9, 4.6, 1.6};
  Heading heading{};
  Vec3 velocity{Vec3::Zero()};
  double angular_velocity{0.0};

  [[nodiscard]] double width() const noexcept { return size.x(); }
  [[nodiscard]] double length() const noexcept { return size.y(); }

  friend bool operator==(const EgoAnchor&, const EgoAnchor&) = default;
};

struct MapAnchor {
  std::int64_t id{kEmptySlot};
  std::vector<Vec2> points;
  MapClass class_label{MapClass::kLaneDivider};
  double existence{0.0};

  [[nodiscard]] bool present() const noexcept { return existence >= 0.5; }

  friend bool operator==(const MapAnchor&, const MapAnchor&) = default;
};

/// Latent per-instance feature. Empty means "not yet encoded".
using InstanceFeature = Eigen::VectorXd;

struct AgentInstance {
  AgentAnchor anchor;
  InstanceFeature feature;
};

struct MapInstance {
  MapAnchor anchor;
  InstanceFeature feature;
};

/// One frame of the sparse scene; all anchors live in the frame's ego frame.
struct InstanceSet {
  std::int64_t frame_index{0};
  EgoAnchor ego;
  std::vector<AgentInstance> agents;
  std::vector<MapInstance> maps;
};

struct Trajectory {
  std::vector<Vec2> waypoints;
  double dt{0.5};

  [[nodiscard]] std::size_t steps() const noexcept { return waypoints.size(); }
};

struct MultiModalTrajectory {
  std::vector<Trajectory> modes;
  std::vector<double> scores;

  /// Highest-scoring mode; ties go to the lowest index.
  [[nodiscard]] std::size_t best() const;
};

struct ActionCondition {
  double speed{0.0};
  Trajectory planned;
  Steering steering{Steering::kStraight};
};

struct RolloutConfig {
  int history{4};   // h
  int forecast{4};  // f
  int window{3};    // m
  double dt{0.5};

  /// Throws ValidationError unless h >= 1, f >= 1, 1 <= m <= h, dt > 0.
  void validate() const;
};

/// Rigid SE(2) pose; maps points of a child frame into the parent frame.
struct Pose2D {
  double x{0.0};
  double y{0.0};
  double yaw{0.0};

  [[nodiscard]] Vec2 apply(const Vec2& p) const noexcept;
  [[nodiscard]] Vec2 rotate(const Vec2& v) const noexcept;
  [[nodiscard]] Pose2D inverse() const noexcept;
  [[nodiscard]] Pose2D compose(const Pose2D& child) const noexcept;
  [[nodiscard]] Heading heading_of(const Heading& child) const noexcept;
};

inline constexpr double kSteeringCurvatureThreshold = 0.02;  // 1/m

/// Mean signed Menger curvature over consecutive waypoint triples, with the
/// emitting frame's origin prepended. Triples containing a segment shorter
/// than 1e-9 m are skipped; returns 0 when none remain.
double mean_signed_curvature(const Trajectory& trajectory);
Steering steering_from_curvature(double curvature) noexcept;

/// Rotation of a 2D vector by `angle` radians counterclockwise.
Vec2 rotate2d(const Vec2& v, double angle) noexcept;

/// Re-expresses every anchor of `frame` through `parent_from_child`.
/// Velocities and headings rotate; ego anchor is left untouched.
InstanceSet transform_instances(const InstanceSet& frame, const Pose2D& parent_from_child);

/// Empty agent/map slot placeholders.
AgentInstance empty_agent_slot();
MapInstance empty_map_slot(int points = kMapPoints);

}  // namespace sparseworld
