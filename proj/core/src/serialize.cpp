#include "sparseworld/serialize.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "sparseworld/errors.hpp"

namespace sparseworld {

using nlohmann::json;

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec_to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Vec2 vec2_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("expected a 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

json feature_to_json(const InstanceFeature& f) {
  json out = json::array();
  for (Eigen::Index i = 0; i < f.size(); ++i) out.push_back(f[i]);
  return out;
}

InstanceFeature feature_from_json(const json& j) {
  InstanceFeature f(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) f[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return f;
}

}  // namespace

void to_json(json& j, const Heading& h) { j = json::array({h.sin, h.cos}); }

void from_json(const json& j, Heading& h) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("heading must be [sin, cos]");
  h.sin = j[0].get<double>();
  h.cos = j[1].get<double>();
}

void to_json(json& j, const AgentAnchor& a) {
  j = json{{"id", a.id},
           {"center", vec_to_json(a.center)},
           {"size", vec_to_json(a.size)},
           {"heading", a.heading},
           {"velocity", vec_to_json(a.velocity)},
           {"class_label", std::string(to_string(a.class_label))},
           {"existence", a.existence}};
}

void from_json(const json& j, AgentAnchor& a) {
  a.id = j.at("id").get<std::int64_t>();
  a.center = vec3_from_json(j.at("center"));
  a.size = vec3_from_json(j.at("size"));
  a.heading = j.at("heading").get<Heading>();
  a.velocity = vec3_from_json(j.at("velocity"));
  a.class_label = agent_class_from_string(j.at("class_label").get<std::string>());
  a.existence = j.at("existence").get<double>();
}

void to_json(json& j, const EgoAnchor& a) {
  j = json{{"center", vec_to_json(a.center)},
           {"size", vec_to_json(a.size)},
           {"heading", a.heading},
           {"velocity", vec_to_json(a.velocity)},
           {"angular_velocity", a.angular_velocity}};
}

void from_json(const json& j, EgoAnchor& a) {
  a.center = vec3_from_json(j.at("center"));
  a.size = vec3_from_json(j.at("size"));
  a.heading = j.at("heading").get<Heading>();
  a.velocity = vec3_from_json(j.at("velocity"));
  a.angular_velocity = j.at("angular_velocity").get<double>();
}

void to_json(json& j, const MapAnchor& a) {
  json points = json::array();
  for (const auto& p : a.points) points.push_back(vec_to_json(p));
  j = json{{"id", a.id},
           {"points", std::move(points)},
           {"class_label", std::string(to_string(a.class_label))},
           {"existence", a.existence}};
}

void from_json(const json& j, MapAnchor& a) {
  a.id = j.at("id").get<std::int64_t>();
  a.points.clear();
  for (const auto& p : j.at("points")) a.points.push_back(vec2_from_json(p));
  a.class_label = map_class_from_string(j.at("class_label").get<std::string>());
  a.existence = j.at("existence").get<double>();
}

void to_json(json& j, const AgentInstance& a) {
  j = a.anchor;
  j["embedding"] = feature_to_json(a.feature);
}

void from_json(const json& j, AgentInstance& a) {
  a.anchor = j.get<AgentAnchor>();
  a.feature = j.contains("embedding") ? feature_from_json(j.at("embedding")) : InstanceFeature{};
}

void to_json(json& j, const MapInstance& a) {
  j = a.anchor;
  j["embedding"] = feature_to_json(a.feature);
}

void from_json(const json& j, MapInstance& a) {
  a.anchor = j.get<MapAnchor>();
  a.feature = j.contains("embedding") ? feature_from_json(j.at("embedding")) : InstanceFeature{};
}

void to_json(json& j, const InstanceSet& s) {
  j = json{{"frame_index", s.frame_index}, {"ego", s.ego}, {"agents", s.agents}, {"maps", s.maps}};
}

void from_json(const json& j, InstanceSet& s) {
  s.frame_index = j.at("frame_index").get<std::int64_t>();
  s.ego = j.at("ego").get<EgoAnchor>();
  s.agents = j.at("agents").get<std::vector<AgentInstance>>();
  s.maps = j.at("maps").get<std::vector<MapInstance>>();
}

void to_json(json& j, const Trajectory& t) {
  json points = json::array();
  for (const auto& p : t.waypoints) points.push_back(vec_to_json(p));
  j = json{{"waypoints", std::move(points)}, {"dt", t.dt}};
}

void from_json(const json& j, Trajectory& t) {
  t.waypoints.clear();
  for (const auto& p : j.at("waypoints")) t.waypoints.push_back(vec2_from_json(p));
  t.dt = j.at("dt").get<double>();
}

void to_json(json& j, const MultiModalTrajectory& t) {
  j = json{{"modes", t.modes}, {"scores", t.scores}};
}

void from_json(const json& j, MultiModalTrajectory& t) {
  t.modes = j.at("modes").get<std::vector<Trajectory>>();
  t.scores = j.at("scores").get<std::vector<double>>();
}

void to_json(json& j, const ActionCondition& c) {
  j = json{{"speed", c.speed},
           {"planned_trajectory", c.planned},
           {"steering", std::string(to_string(c.steering))}};
}

void from_json(const json& j, ActionCondition& c) {
  c.speed = j.at("speed").get<double>();
  c.planned = j.at("planned_trajectory").get<Trajectory>();
  c.steering = steering_from_string(j.at("steering").get<std::string>());
}

void to_json(json& j, const RolloutConfig& c) {
  j = json{{"h", c.history}, {"f", c.forecast}, {"m", c.window}, {"dt", c.dt}};
}

void from_json(const json& j, RolloutConfig& c) {
  c.history = j.at("h").get<int>();
  c.forecast = j.at("f").get<int>();
  c.window = j.at("m").get<int>();
  c.dt = j.at("dt").get<double>();
}

void write_scene_log(std::ostream& os, const std::vector<InstanceSet>& frames) {
  for (const auto& frame : frames) os << json(frame).dump() << '\n';
}

std::vector<InstanceSet> read_scene_log(std::istream& is) {
  std::vector<InstanceSet> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      frames.push_back(json::parse(line).get<InstanceSet>());
    } catch (const json::exception& e) {
      throw ValidationError("scene log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return frames;
}

void write_scene_log(const std::filesystem::path& path, const std::vector<InstanceSet>& frames) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_scene_log(os, frames);
  if (!os) throw IoError("write failed for " + path.string());
}

std::vector<InstanceSet> read_scene_log(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return read_scene_log(is);
}

}  // namespace sparseworld
