#include "sparseworld/geometry.hpp"

#include <cmath>

namespace sparseworld {

std::array<Vec2, 4> OrientedBox2D::corners() const noexcept {
  const Vec2 along = axis_along() * half_extents.x();
  const Vec2 across = axis_across() * half_extents.y();
  return {center + along + across, center - along + across, center - along - across,
          center + along - across};
}

bool OrientedBox2D::contains(const Vec2& p, double tol) const noexcept {
  const Vec2 d = p - center;
  return std::abs(d.dot(axis_along())) <= half_extents.x() + tol &&
         std::abs(d.dot(axis_across())) <= half_extents.y() + tol;
}

bool boxes_overlap(const OrientedBox2D& a, const OrientedBox2D& b, double margin) noexcept {
  const Vec2 d = b.center - a.center;
  const std::array<Vec2, 4> axes{a.axis_along(), a.axis_across(), b.axis_along(), b.axis_across()};
  for (const Vec2& axis : axes) {
    const double ra = a.half_extents.x() * std::abs(a.axis_along().dot(axis)) +
                      a.half_extents.y() * std::abs(a.axis_across().dot(axis)) + margin;
    const double rb = b.half_extents.x() * std::abs(b.axis_along().dot(axis)) +
                      b.half_extents.y() * std::abs(b.axis_across().dot(axis)) + margin;
    if (std::abs(d.dot(axis)) > ra + rb) return false;
  }
  return true;
}

namespace {

template <typename Anchor>
OrientedBox2D make_box(const Anchor& anchor, std::optional<Vec2> center, std::optional<Heading> heading) {
  OrientedBox2D box;
  box.center = center.value_or(Vec2{anchor.center.x(), anchor.center.y()});
  box.half_extents = {anchor.length() / 2.0, anchor.width() / 2.0};
  box.heading = heading.value_or(anchor.heading);
  return box;
}

}  // namespace

OrientedBox2D obb_of(const AgentAnchor& anchor, std::optional<Vec2> center_override,
                     std::optional<Heading> heading_override) {
  return make_box(anchor, center_override, heading_override);
}

OrientedBox2D obb_of(const EgoAnchor& anchor, std::optional<Vec2> center_override,
                     std::optional<Heading> heading_override) {
  return make_box(anchor, center_override, heading_override);
}

}  // namespace sparseworld
