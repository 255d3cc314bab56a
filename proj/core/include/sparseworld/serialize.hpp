#pragma once

// JSON (de)serialization of scene types. Field names follow the struct
// members; reals are written with round-trip precision.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparseworld/scene.hpp"

namespace sparseworld {

void to_json(nlohmann::json& j, const Heading& h);
void from_json(const nlohmann::json& j, Heading& h);
void to_json(nlohmann::json& j, const AgentAnchor& a);
void from_json(const nlohmann::json& j, AgentAnchor& a);
void to_json(nlohmann::json& j, const EgoAnchor& a);
void from_json(const nlohmann::json& j, EgoAnchor& a);
void to_json(nlohmann::json& j, const MapAnchor& a);
void from_json(const nlohmann::json& j, MapAnchor& a);
void to_json(nlohmann::json& j, const AgentInstance& a);
void from_json(const nlohmann::json& j, AgentInstance& a);
void to_json(nlohmann::json& j, const MapInstance& a);
void from_json(const nlohmann::json& j, MapInstance& a);
void to_json(nlohmann::json& j, const InstanceSet& s);
void from_json(const nlohmann::json& j, InstanceSet& s);
void to_json(nlohmann::json& j, const Trajectory& t);
void from_json(const nlohmann::json& j, Trajectory& t);
void to_json(nlohmann::json& j, const MultiModalTrajectory& t);
void from_json(const nlohmann::json& j, MultiModalTrajectory& t);
void to_json(nlohmann::json& j, const ActionCondition& c);
void from_json(const nlohmann::json& j, ActionCondition& c);
void to_json(nlohmann::json& j, const RolloutConfig& c);
void from_json(const nlohmann::json& j, RolloutConfig& c);

/// Scene log: one InstanceSet per line.
void write_scene_log(std::ostream& os, const std::vector<InstanceSet>& frames);
std::vector<InstanceSet> read_scene_log(std::istream& is);
void write_scene_log(const std::filesystem::path& path, const std::vector<InstanceSet>& frames);
std::vector<InstanceSet> read_scene_log(const std::filesystem::path& path);

}  // namespace sparseworld
