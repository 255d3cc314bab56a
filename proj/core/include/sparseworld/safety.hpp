#pragma once

// Box geometry along trajectories and the safety adjustment built on it.
//
// Signed separation between two oriented boxes is the Euclidean gap when
// they are disjoint and minus the smallest separating-axis overlap when they
// intersect. The accompanying unit direction points from b toward a, i.e.
// moving a along it increases the separation.

#include <vector>

#include "sparseworld/geometry.hpp"
#include "sparseworld/scene.hpp"

namespace sparseworld {

struct SafetyConfig {
  double theta{0.5};           // safety distance, m
  int max_resolve_iters{3};    // violator re-checks per step
  double adjustment_cap{2.0};  // max adjustment norm per step, m

  /// Throws ValidationError unless theta >= 0, iters >= 1, cap > 0.
  void validate() const;
};

/// Per-step 2D displacement added to the ego waypoints (T x 2).
using AdjustmentVector = std::vector<Vec2>;

/// Box of `anchor` placed at waypoint t (1-based). Heading follows the step
/// from waypoint t-1 (waypoint 0 is the anchor position) and falls back to
/// the anchor heading for steps shorter than 1e-6 m.
OrientedBox2D box_along(const AgentAnchor& anchor, const Trajectory& trajectory, int t);
OrientedBox2D box_along(const EgoAnchor& anchor, const Trajectory& trajectory, int t);

struct Separation {
  double distance{0.0};
  Vec2 direction{1.0, 0.0};
};

Separation min_distance_vector(const OrientedBox2D& a, const OrientedBox2D& b);

/// Safety adjustment of the ego plan against predicted agent motion.
///
/// Steps are resolved in order. The ego box at step t is oriented from the
/// already adjusted waypoint t-1 to the adjusted waypoint t, so applying the
/// result and recomputing yields zero wherever a step was resolved. Each
/// step runs up to max_resolve_iters rounds; a round picks the worst
/// violator and pushes the waypoint along its separation direction until
/// that agent sits at theta. The total per-step adjustment is clamped to
/// adjustment_cap.
AdjustmentVector sav(const Trajectory& ego_traj, const std::vector<AgentAnchor>& agents,
                     const std::vector<Trajectory>& agent_trajs, const SafetyConfig& config,
                     const EgoAnchor& ego_anchor);

/// Mean norm over the non-zero entries; 0 for an all-zero vector.
double scl(const AdjustmentVector& v);

/// Step t collides iff the ego box overlaps any agent box (signed distance < 0).
std::vector<bool> collision_detect(const Trajectory& ego_traj, const EgoAnchor& ego_anchor,
                                   const std::vector<AgentAnchor>& agents,
                                   const std::vector<Trajectory>& agent_trajs);

Trajectory apply_adjustment(const Trajectory& trajectory, const AdjustmentVector& v);

}  // namespace sparseworld
