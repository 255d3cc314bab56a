#include "sparseworld/selection.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "sparseworld/serialize.hpp"

namespace sparseworld {

std::string_view to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::kBase: return "base";
    case Provenance::kFuture: return "future";
    case Provenance::kRefined: return "refined";
  }
  return "base";
}

const Trajectory& CandidateSet::get(Provenance p) const noexcept {
  switch (p) {
    case Provenance::kBase: return base;
    case Provenance::kFuture: return future;
    case Provenance::kRefined: return refined;
  }
  return base;
}

namespace {

constexpr double kTieTolerance = 1e-9;

bool any(const std::vector<bool>& v) { return std::find(v.begin(), v.end(), true) != v.end(); }

// Lower scl wins; within the tolerance the later provenance (refined) wins.
const CandidateReport* pick(const std::vector<CandidateReport>& reports, bool eligible_only) {
  const CandidateReport* best = nullptr;
  for (const auto& r : reports) {
    if (eligible_only && !r.eligible()) continue;
    if (best == nullptr || r.scl < best->scl - kTieTolerance ||
        (std::abs(r.scl - best->scl) <= kTieTolerance && r.provenance > best->provenance)) {
      best = &r;
    }
  }
  return best;
}

}  // namespace

SelectionReport select(const CandidateSet& candidates, const EgoAnchor& ego_anchor,
                       const std::vector<AgentAnchor>& agents, const std::vector<Trajectory>& agent_trajs_base,
                       const std::vector<Trajectory>& agent_trajs_refined, const SafetyConfig& config) {
  std::vector<AgentAnchor> union_agents = agents;
  union_agents.insert(union_agents.end(), agents.begin(), agents.end());
  std::vector<Trajectory> union_trajs = agent_trajs_base;
  union_trajs.insert(union_trajs.end(), agent_trajs_refined.begin(), agent_trajs_refined.end());

  SelectionReport report;
  for (Provenance p : {Provenance::kBase, Provenance::kFuture, Provenance::kRefined}) {
    const Trajectory& traj = candidates.get(p);
    CandidateReport r;
    r.provenance = p;
    r.adjustment = sav(traj, union_agents, union_trajs, config, ego_anchor);
    r.scl = scl(r.adjustment);
    r.collides_base = any(collision_detect(traj, ego_anchor, agents, agent_trajs_base));
    r.collides_refined = any(collision_detect(traj, ego_anchor, agents, agent_trajs_refined));
    report.candidates.push_back(std::move(r));
  }
  const CandidateReport* chosen = pick(report.candidates, true);
  if (chosen == nullptr) {
    report.fallback = true;
    chosen = pick(report.candidates, false);
  }
  report.chosen = chosen->provenance;
  report.final_trajectory = apply_adjustment(candidates.get(chosen->provenance), chosen->adjustment);
  return report;
}

void to_json(nlohmann::json& j, const CandidateReport& r) {
  nlohmann::json adj = nlohmann::json::array();
  for (const auto& v : r.adjustment) adj.push_back({v.x(), v.y()});
  j = {{"provenance", to_string(r.provenance)},
       {"scl", r.scl},
       {"collides_base", r.collides_base},
       {"collides_refined", r.collides_refined},
       {"adjustment", std::move(adj)}};
}

void to_json(nlohmann::json& j, const SelectionReport& r) {
  j = {{"candidates", r.candidates},
       {"chosen", to_string(r.chosen)},
       {"fallback", r.fallback},
       {"final", r.final_trajectory}};
}

}  // namespace sparseworld
