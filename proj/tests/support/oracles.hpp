#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. None of them call into the code they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "sparseworld/geometry.hpp"
#include "sparseworld/nn/params.hpp"
#include "sparseworld/scene.hpp"
#include "sparseworld/world.hpp"

namespace oracle {

using sparseworld::Vec2;

struct Box {
  Vec2 center;
  double half_length;
  double half_width;
  double yaw;
};

inline Box from(const sparseworld::OrientedBox2D& b) {
  return {b.center, b.half_extents.x(), b.half_extents.y(), std::atan2(b.heading.sin, b.heading.cos)};
}

inline std::array<Vec2, 4> corners(const Box& b) {
  const Vec2 f{std::cos(b.yaw), std::sin(b.yaw)};
  const Vec2 l{-f.y(), f.x()};
  return {b.center + b.half_length * f + b.half_width * l, b.center - b.half_length * f + b.half_width * l,
          b.center - b.half_length * f - b.half_width * l, b.center + b.half_length * f - b.half_width * l};
}

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline bool inside(const Box& b, const Vec2& p) {
  const Vec2 d = p - b.center;
  const Vec2 f{std::cos(b.yaw), std::sin(b.yaw)};
  return std::abs(d.dot(f)) < b.half_length && std::abs(cross(f, d)) < b.half_width;
}

inline bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

// Polygon intersection by edge crossings plus containment.
inline bool overlap(const Box& a, const Box& b) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (segments_cross(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4])) return true;
    }
  }
  return inside(a, cb[0]) || inside(b, ca[0]) || (a.center - b.center).norm() < 1e-12;
}

inline double point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Gap between disjoint boxes from densely sampled boundary points of each
// box against the exact edges of the other.
inline double gap(const Box& a, const Box& b, int samples_per_edge = 400) {
  double best = std::numeric_limits<double>::infinity();
  auto sweep = [&](const Box& from, const Box& to) {
    const auto cf = corners(from);
    const auto ct = corners(to);
    for (int i = 0; i < 4; ++i) {
      for (int s = 0; s <= samples_per_edge; ++s) {
        const Vec2 p = cf[i] + (cf[(i + 1) % 4] - cf[i]) * (static_cast<double>(s) / samples_per_edge);
        for (int j = 0; j < 4; ++j) best = std::min(best, point_segment(p, ct[j], ct[(j + 1) % 4]));
      }
    }
  };
  sweep(a, b);
  sweep(b, a);
  return best;
}

// Penetration depth as the smallest projection overlap over densely sampled
// directions.
inline double penetration(const Box& a, const Box& b, int directions = 7200) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < directions; ++k) {
    const double ang = std::acos(-1.0) * k / directions;
    const Vec2 n{std::cos(ang), std::sin(ang)};
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const auto& p : ca) {
      amin = std::min(amin, p.dot(n));
      amax = std::max(amax, p.dot(n));
    }
    for (const auto& p : cb) {
      bmin = std::min(bmin, p.dot(n));
      bmax = std::max(bmax, p.dot(n));
    }
    best = std::min(best, std::min(amax - bmin, bmax - amin));
  }
  return best;
}

/// Signed separation: gap when disjoint, minus the penetration depth otherwise.
inline double signed_distance(const Box& a, const Box& b) {
  return overlap(a, b) ? -penetration(a, b) : gap(a, b);
}

/// Mean norm of the non-zero steps, written out term by term.
inline double safety_cost(const std::vector<Vec2>& v) {
  double total = 0.0;
  int nonzero = 0;
  for (const auto& s : v) {
    const double n = std::sqrt(s.x() * s.x() + s.y() * s.y());
    if (n > 0.0) {
      total += n;
      nonzero += 1;
    }
  }
  return nonzero == 0 ? 0.0 : total / nonzero;
}

/// Scenario whose agents all keep constant velocity and whose ego holds a
/// constant speed and yaw rate.
inline sparseworld::Scenario constant_motion_scenario(std::uint64_t seed, double ego_speed, double ego_omega,
                                                      int agents = 8) {
  sparseworld::ScenarioConfig config;
  config.seed = seed;
  config.n_agents = agents;
  config.motion_mix = {1.0, 0.0, 0.0, 0.0};
  sparseworld::ScenarioPlan plan = sparseworld::sample_plan(config);
  std::fill(plan.ego_speed.begin(), plan.ego_speed.end(), ego_speed);
  std::fill(plan.ego_omega.begin(), plan.ego_omega.end(), ego_omega);
  return sparseworld::simulate(config, plan);
}

struct GradientCheck {
  double max_relative_error{0.0};
  int directions{0};
};

/// Compares the analytic directional derivative g.d with a central
/// difference of `loss` along random unit directions d.
inline GradientCheck check_gradient(sparseworld::nn::ParameterSet& params, const std::function<double()>& loss,
                                    const Eigen::VectorXd& analytic, int directions, std::uint64_t seed,
                                    double step = 1e-5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Eigen::VectorXd theta = params.to_flat();
  GradientCheck out;
  for (int k = 0; k < directions; ++k) {
    Eigen::VectorXd d(theta.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = normal(rng);
    d.normalize();
    params.from_flat(theta + step * d);
    const double up = loss();
    params.from_flat(theta - step * d);
    const double down = loss();
    const double numeric = (up - down) / (2.0 * step);
    const double exact = analytic.dot(d);
    const double scale = std::max({std::abs(numeric), std::abs(exact), 1e-8});
    out.max_relative_error = std::max(out.max_relative_error, std::abs(numeric - exact) / scale);
    ++out.directions;
  }
  params.from_flat(theta);
  return out;
}

}  // namespace oracle
