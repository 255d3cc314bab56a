#include "sparseworld/safety.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "sparseworld/errors.hpp"

namespace sparseworld {

void SafetyConfig::validate() const {
  if (!(theta >= 0.0)) throw ValidationError("theta must be >= 0");
  if (max_resolve_iters < 1) throw ValidationError("max_resolve_iters must be >= 1");
  if (!(adjustment_cap > 0.0)) throw ValidationError("adjustment_cap must be > 0");
}

namespace {

constexpr double kMinStep = 1e-6;
constexpr int kMaxPushes = 50;
// Small overshoot so a resolved step stays resolved under re-evaluation.
constexpr double kPushMargin = 1e-9;

Vec2 waypoint(const Trajectory& traj, const Vec2& origin, int t) {
  return t == 0 ? origin : traj.waypoints[static_cast<std::size_t>(t - 1)];
}

Heading step_heading(const Vec2& from, const Vec2& to, const Heading& fallback) {
  const Vec2 d = to - from;
  if (d.norm() < kMinStep) return fallback;
  return normalize_heading(d.y(), d.x());
}

template <typename Anchor>
OrientedBox2D box_along_impl(const Anchor& anchor, const Trajectory& trajectory, int t) {
  if (t < 1 || t > static_cast<int>(trajectory.steps())) {
    throw ValidationError("box_along step " + std::to_string(t) + " outside 1.." +
                          std::to_string(trajectory.steps()));
  }
  const Vec2 origin{anchor.center.x(), anchor.center.y()};
  const Vec2 to = waypoint(trajectory, origin, t);
  return obb_of(anchor, to, step_heading(waypoint(trajectory, origin, t - 1), to, anchor.heading));
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b, Vec2& closest) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  closest = a + s * ab;
  return (p - closest).norm();
}

double projected_radius(const OrientedBox2D& box, const Vec2& axis) {
  return box.half_extents.x() * std::abs(box.axis_along().dot(axis)) +
         box.half_extents.y() * std::abs(box.axis_across().dot(axis));
}

}  // namespace

OrientedBox2D box_along(const AgentAnchor& anchor, const Trajectory& trajectory, int t) {
  return box_along_impl(anchor, trajectory, t);
}

OrientedBox2D box_along(const EgoAnchor& anchor, const Trajectory& trajectory, int t) {
  return box_along_impl(anchor, trajectory, t);
}

Separation min_distance_vector(const OrientedBox2D& a, const OrientedBox2D& b) {
  const Vec2 d = a.center - b.center;
  const std::array<Vec2, 4> axes{a.axis_along(), a.axis_across(), b.axis_along(), b.axis_across()};

  bool separated = false;
  double min_overlap = std::numeric_limits<double>::infinity();
  Vec2 min_axis = axes[0];
  for (const Vec2& axis : axes) {
    const double overlap = projected_radius(a, axis) + projected_radius(b, axis) - std::abs(d.dot(axis));
    if (overlap <= 0.0) separated = true;
    if (overlap < min_overlap) {
      min_overlap = overlap;
      min_axis = axis;
    }
  }
  const Vec2 axis_dir = d.dot(min_axis) < 0.0 ? Vec2(-min_axis) : min_axis;
  if (!separated) return {-min_overlap, axis_dir};

  // Disjoint convex polygons: the gap is realized between a vertex of one
  // and an edge of the other.
  const auto ca = a.corners();
  const auto cb = b.corners();
  double best = std::numeric_limits<double>::infinity();
  Vec2 pa = a.center;
  Vec2 pb = b.center;
  for (int i = 0; i < 4; ++i) {
    for (int e = 0; e < 4; ++e) {
      Vec2 q;
      const double da = point_segment_distance(ca[static_cast<std::size_t>(i)], cb[static_cast<std::size_t>(e)],
                                                cb[static_cast<std::size_t>((e + 1) % 4)], q);
      if (da < best) {
        best = da;
        pa = ca[static_cast<std::size_t>(i)];
        pb = q;
      }
      const double db = point_segment_distance(cb[static_cast<std::size_t>(i)], ca[static_cast<std::size_t>(e)],
                                                ca[static_cast<std::size_t>((e + 1) % 4)], q);
      if (db < best) {
        best = db;
        pa = q;
        pb = cb[static_cast<std::size_t>(i)];
      }
    }
  }
  const Vec2 gap = pa - pb;
  const double n = gap.norm();
  return {best, n > 1e-12 ? Vec2(gap / n) : axis_dir};
}

AdjustmentVector sav(const Trajectory& ego_traj, const std::vector<AgentAnchor>& agents,
                     const std::vector<Trajectory>& agent_trajs, const SafetyConfig& config,
                     const EgoAnchor& ego_anchor) {
  config.validate();
  if (agents.size() != agent_trajs.size()) throw ShapeMismatch("one trajectory per agent is required");
  const int T = static_cast<int>(ego_traj.steps());
  for (const auto& tr : agent_trajs) {
    if (static_cast<int>(tr.steps()) != T) throw ShapeMismatch("agent trajectory length differs from the ego plan");
  }

  AdjustmentVector out(static_cast<std::size_t>(T), Vec2::Zero());
  Vec2 previous{ego_anchor.center.x(), ego_anchor.center.y()};
  std::vector<OrientedBox2D> others(agents.size());
  for (int t = 1; t <= T; ++t) {
    for (std::size_t j = 0; j < agents.size(); ++j) others[j] = box_along(agents[j], agent_trajs[j], t);
    const Vec2 w = ego_traj.waypoints[static_cast<std::size_t>(t - 1)];
    Vec2 adj = Vec2::Zero();
    auto ego_box = [&](const Vec2& shift) {
      const Vec2 c = w + shift;
      return obb_of(ego_anchor, c, step_heading(previous, c, ego_anchor.heading));
    };

    bool clamped = false;
    for (int round = 0; round < config.max_resolve_iters && !clamped; ++round) {
      const OrientedBox2D box = ego_box(adj);
      std::size_t worst = others.size();
      double worst_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < others.size(); ++j) {
        const double d = min_distance_vector(box, others[j]).distance;
        if (d < worst_d) {
          worst_d = d;
          worst = j;
        }
      }
      if (worst == others.size() || worst_d >= config.theta) break;
      for (int push = 0; push < kMaxPushes; ++push) {
        const Separation sep = min_distance_vector(ego_box(adj), others[worst]);
        if (sep.distance >= config.theta) break;
        adj += (config.theta - sep.distance + kPushMargin) * sep.direction;
        if (adj.norm() > config.adjustment_cap) {
          adj *= config.adjustment_cap / adj.norm();
          clamped = true;
          break;
        }
      }
    }
    out[static_cast<std::size_t>(t - 1)] = adj;
    previous = w + adj;
  }
  return out;
}

double scl(const AdjustmentVector& v) {
  double sum = 0.0;
  int count = 0;
  for (const Vec2& step : v) {
    const double n = step.norm();
    if (n != 0.0) {
      sum += n;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / count;
}

std::vector<bool> collision_detect(const Trajectory& ego_traj, const EgoAnchor& ego_anchor,
                                   const std::vector<AgentAnchor>& agents,
                                   const std::vector<Trajectory>& agent_trajs) {
  if (agents.size() != agent_trajs.size()) throw ShapeMismatch("one trajectory per agent is required");
  const int T = static_cast<int>(ego_traj.steps());
  std::vector<bool> out(static_cast<std::size_t>(T), false);
  for (int t = 1; t <= T; ++t) {
    const OrientedBox2D ego = box_along(ego_anchor, ego_traj, t);
    for (std::size_t j = 0; j < agents.size(); ++j) {
      if (static_cast<int>(agent_trajs[j].steps()) != T) {
        throw ShapeMismatch("agent trajectory length differs from the ego plan");
      }
      if (min_distance_vector(ego, box_along(agents[j], agent_trajs[j], t)).distance < 0.0) {
        out[static_cast<std::size_t>(t - 1)] = true;
        break;
      }
    }
  }
  return out;
}

Trajectory apply_adjustment(const Trajectory& trajectory, const AdjustmentVector& v) {
  if (v.size() != trajectory.steps()) throw ShapeMismatch("adjustment length differs from the trajectory");
  Trajectory out = trajectory;
  for (std::size_t t = 0; t < v.size(); ++t) out.waypoints[t] += v[t];
  return out;
}

}  // namespace sparseworld
