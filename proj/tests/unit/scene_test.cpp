#include <cmath>

#include <gtest/gtest.h>

#include "sparseworld/errors.hpp"
#include "sparseworld/geometry.hpp"
#include "sparseworld/scene.hpp"
#include "sparseworld/serialize.hpp"

namespace sw = sparseworld;

namespace {

sw::Trajectory arc(double radius, double speed, int steps, double dt = 0.5) {
  sw::Trajectory t;
  t.dt = dt;
  for (int k = 1; k <= steps; ++k) {
    const double phi = speed * dt * k / radius;
    t.waypoints.emplace_back(radius * std::sin(phi), radius * (1.0 - std::cos(phi)));
  }
  return t;
}

}  // namespace

TEST(Heading, NormalizeScalesToUnit) {
  const auto a = sw::normalize_heading(0.0, 2.0);
  EXPECT_DOUBLE_EQ(a.sin, 0.0);
  EXPECT_DOUBLE_EQ(a.cos, 1.0);
  const auto b = sw::normalize_heading(3.0, 4.0);
  EXPECT_NEAR(b.sin, 0.6, 1e-15);
  EXPECT_NEAR(b.cos, 0.8, 1e-15);
}

TEST(Heading, DegenerateInputThrows) {
  EXPECT_THROW(sw::normalize_heading(1e-13, 1e-13), sw::DegenerateHeading);
}

TEST(Heading, AngleRoundTrip) {
  for (double yaw = -3.0; yaw <= 3.0; yaw += 0.25) {
    const auto h = sw::Heading::from_angle(yaw);
    EXPECT_NEAR(h.sin * h.sin + h.cos * h.cos, 1.0, 1e-12);
    EXPECT_NEAR(h.angle(), yaw, 1e-12);
  }
}

TEST(Obb, AxisAlignedCorners) {
  sw::AgentAnchor a;
  a.size = {2.0, 4.0, 1.5};
  const auto box = sw::obb_of(a);
  for (const auto& c : box.corners()) {
    EXPECT_NEAR(std::abs(c.x()), 2.0, 1e-12);
    EXPECT_NEAR(std::abs(c.y()), 1.0, 1e-12);
  }
}

TEST(Obb, QuarterTurnSwapsExtents) {
  sw::AgentAnchor a;
  a.size = {2.0, 4.0, 1.5};
  a.heading = sw::Heading::from_angle(sw::kPi / 2);
  for (const auto& c : sw::obb_of(a).corners()) {
    EXPECT_NEAR(std::abs(c.x()), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(c.y()), 2.0, 1e-12);
  }
}

TEST(Obb, RotatedCornersMatchHandComputation) {
  sw::AgentAnchor a;
  a.size = {1.8, 4.5, 1.5};
  a.center = {1.0, -2.0, 0.0};
  const double psi = sw::kPi / 6;
  a.heading = sw::Heading::from_angle(psi);
  const auto corners = sw::obb_of(a).corners();
  const double c = std::cos(psi), s = std::sin(psi);
  const std::array<sw::Vec2, 4> local{sw::Vec2{2.25, 0.9}, sw::Vec2{-2.25, 0.9}, sw::Vec2{-2.25, -0.9},
                                      sw::Vec2{2.25, -0.9}};
  for (std::size_t i = 0; i < 4; ++i) {
    const sw::Vec2 expected{1.0 + c * local[i].x() - s * local[i].y(), -2.0 + s * local[i].x() + c * local[i].y()};
    EXPECT_NEAR((corners[i] - expected).norm(), 0.0, 1e-12) << "corner " << i;
  }
}

TEST(Obb, OverridesReplacePose) {
  sw::EgoAnchor e;
  const auto box = sw::obb_of(e, sw::Vec2{3.0, 4.0}, sw::Heading::from_angle(1.0));
  EXPECT_DOUBLE_EQ(box.center.x(), 3.0);
  EXPECT_NEAR(box.heading.angle(), 1.0, 1e-12);
}

TEST(Pose2D, ComposeWithInverseIsIdentity) {
  const sw::Pose2D p{1.5, -2.0, 0.7};
  const auto id = p.compose(p.inverse());
  EXPECT_NEAR(id.x, 0.0, 1e-12);
  EXPECT_NEAR(id.y, 0.0, 1e-12);
  EXPECT_NEAR(id.yaw, 0.0, 1e-12);
  const sw::Vec2 q{3.0, 1.0};
  EXPECT_NEAR((p.inverse().apply(p.apply(q)) - q).norm(), 0.0, 1e-12);
}

TEST(Curvature, StraightIsZero) {
  sw::Trajectory t;
  for (int k = 1; k <= 6; ++k) t.waypoints.emplace_back(5.0 * k, 0.0);
  EXPECT_NEAR(sw::mean_signed_curvature(t), 0.0, 1e-15);
  EXPECT_EQ(sw::steering_from_curvature(0.0), sw::Steering::kStraight);
}

TEST(Curvature, ArcMatchesInverseRadius) {
  EXPECT_NEAR(sw::mean_signed_curvature(arc(20.0, 10.0, 6)), 0.05, 1e-9);
  EXPECT_NEAR(sw::mean_signed_curvature(arc(-20.0, 10.0, 6)), -0.05, 1e-9);
  EXPECT_EQ(sw::steering_from_curvature(0.05), sw::Steering::kLeft);
  EXPECT_EQ(sw::steering_from_curvature(-0.05), sw::Steering::kRight);
  EXPECT_EQ(sw::steering_from_curvature(0.019), sw::Steering::kStraight);
}

TEST(Curvature, RepeatedPointsAreSkipped) {
  sw::Trajectory t;
  t.waypoints.assign(6, sw::Vec2::Zero());
  EXPECT_EQ(sw::mean_signed_curvature(t), 0.0);
}

TEST(MultiModal, BestPrefersLowestIndexOnTies) {
  sw::MultiModalTrajectory m;
  m.modes.resize(3);
  m.scores = {0.2, 0.5, 0.5};
  EXPECT_EQ(m.best(), 1u);
}

TEST(RolloutConfig, ValidatesRanges) {
  EXPECT_NO_THROW(sw::RolloutConfig{}.validate());
  EXPECT_THROW((sw::RolloutConfig{4, 4, 5, 0.5}.validate()), sw::ValidationError);
  EXPECT_THROW((sw::RolloutConfig{4, 0, 3, 0.5}.validate()), sw::ValidationError);
  EXPECT_THROW((sw::RolloutConfig{4, 4, 3, 0.0}.validate()), sw::ValidationError);
}

TEST(TransformInstances, RotatesVelocityAndHeading) {
  sw::InstanceSet s;
  sw::AgentInstance a;
  a.anchor.id = 1;
  a.anchor.center = {1.0, 0.0, 0.0};
  a.anchor.velocity = {2.0, 0.0, 0.0};
  s.agents.push_back(a);
  const auto out = sw::transform_instances(s, {0.0, 0.0, sw::kPi / 2});
  EXPECT_NEAR(out.agents[0].anchor.center.y(), 1.0, 1e-12);
  EXPECT_NEAR(out.agents[0].anchor.velocity.y(), 2.0, 1e-12);
  EXPECT_NEAR(out.agents[0].anchor.heading.angle(), sw::kPi / 2, 1e-12);
}

TEST(Serialize, InstanceSetRoundTrip) {
  sw::InstanceSet s;
  s.frame_index = 7;
  sw::AgentInstance a;
  a.anchor.id = 3;
  a.anchor.center = {0.1, 1.0 / 3.0, 0.0};
  a.anchor.heading = sw::Heading::from_angle(0.3);
  a.anchor.existence = 1.0;
  a.anchor.class_label = sw::AgentClass::kCyclist;
  s.agents.push_back(a);
  s.agents.push_back(sw::empty_agent_slot());
  s.maps.push_back(sw::empty_map_slot());
  const nlohmann::json j = s;
  const auto back = j.get<sw::InstanceSet>();
  EXPECT_EQ(back.frame_index, 7);
  ASSERT_EQ(back.agents.size(), 2u);
  EXPECT_EQ(back.agents[0].anchor, a.anchor);
  EXPECT_EQ(nlohmann::json(back), j);
}
