#pragma once

// Adaptive trajectory selection among the baseline plan, the forecasting
// path's plan and the refined plan.

#include <array>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sparseworld/safety.hpp"

namespace sparseworld {

enum class Provenance : std::uint8_t { kBase, kFuture, kRefined };

std::string_view to_string(Provenance p) noexcept;

struct CandidateSet {
  Trajectory base;
  Trajectory future;
  Trajectory refined;

  [[nodiscard]] const Trajectory& get(Provenance p) const noexcept;
};

struct CandidateReport {
  Provenance provenance{Provenance::kBase};
  double scl{0.0};
  bool collides_base{false};     // against baseline agent predictions
  bool collides_refined{false};  // against refined agent predictions
  AdjustmentVector adjustment;

  [[nodiscard]] bool eligible() const noexcept { return !collides_base && !collides_refined; }
};

struct SelectionReport {
  std::vector<CandidateReport> candidates;  // base, future, refined
  Provenance chosen{Provenance::kRefined};
  bool fallback{false};  // no candidate was collision-free
  Trajectory final_trajectory;
};

/// Scores every candidate (adjustment and scl against the union of both
/// prediction sets, collision flags against each set), picks the
/// collision-free candidate with the lowest scl (ties within 1e-9 go
/// refined > future > base; if none is collision-free, the lowest scl
/// overall) and applies its adjustment.
SelectionReport select(const CandidateSet& candidates, const EgoAnchor& ego_anchor,
                       const std::vector<AgentAnchor>& agents, const std::vector<Trajectory>& agent_trajs_base,
                       const std::vector<Trajectory>& agent_trajs_refined, const SafetyConfig& config);

void to_json(nlohmann::json& j, const CandidateReport& r);
void to_json(nlohmann::json& j, const SelectionReport& r);

}  // namespace sparseworld
