#pragma once

#include <array>
#include <optional>

#include "sparseworld/scene.hpp"

namespace sparseworld {

struct OrientedBox2D {
  Vec2 center{Vec2::Zero()};
  Vec2 half_extents{1.0, 1.0};  // (l/2, w/2): along / across heading
  Heading heading{};

  /// Corners in counterclockwise order starting at front-left.
  [[nodiscard]] std::array<Vec2, 4> corners() const noexcept;
  [[nodiscard]] Vec2 axis_along() const noexcept { return heading.direction(); }
  [[nodiscard]] Vec2 axis_across() const noexcept { return {-heading.sin, heading.cos}; }
  [[nodiscard]] bool contains(const Vec2& p, double tol = 0.0) const noexcept;
};

/// Separating-axis overlap test; `margin` inflates both boxes.
bool boxes_overlap(const OrientedBox2D& a, const OrientedBox2D& b, double margin = 0.0) noexcept;

OrientedBox2D obb_of(const AgentAnchor& anchor,
                     std::optional<Vec2> center_override = std::nullopt,
                     std::optional<Heading> heading_override = std::nullopt);
OrientedBox2D obb_of(const EgoAnchor& anchor,
                     std::optional<Vec2> center_override = std::nullopt,
                     std::optional<Heading> heading_override = std::nullopt);

}  // namespace sparseworld
