#include "dplan/scene.hpp"

#include <cmath>
#include <stdexcept>

namespace dplan {

const char* to_string(NavCommand nav) {
  switch (nav) {
    case NavCommand::FollowLane: return "FOLLOW_LANE";
    case NavCommand::TurnLeft: return "TURN_LEFT";
    case NavCommand::TurnRight: return "TURN_RIGHT";
    case NavCommand::Stop: return "STOP";
  }
  throw std::logic_error("bad nav command");
}

NavCommand nav_from_string(const std::string& s) {
  if (s == "FOLLOW_LANE") return NavCommand::FollowLane;
  if (s == "TURN_LEFT") return NavCommand::TurnLeft;
  if (s == "TURN_RIGHT") return NavCommand::TurnRight;
  if (s == "STOP") return NavCommand::Stop;
  throw std::invalid_argument("unknown nav command: " + s);
}

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Straight: return "STRAIGHT";
    case ScenarioKind::Curve: return "CURVE";
    case ScenarioKind::IntersectionTurn: return "INTERSECTION_TURN";
    case ScenarioKind::LeadBrake: return "LEAD_BRAKE";
    case ScenarioKind::Narrowing: return "NARROWING";
    case ScenarioKind::Fork: return "FORK";
  }
  throw std::logic_error("bad scenario kind");
}

ScenarioKind kind_from_string(const std::string& s) {
  if (s == "STRAIGHT") return ScenarioKind::Straight;
  if (s == "CURVE") return ScenarioKind::Curve;
  if (s == "INTERSECTION_TURN") return ScenarioKind::IntersectionTurn;
  if (s == "LEAD_BRAKE") return ScenarioKind::LeadBrake;
  if (s == "NARROWING") return ScenarioKind::Narrowing;
  if (s == "FORK") return ScenarioKind::Fork;
  throw std::invalid_argument("unknown scenario kind: " + s);
}

void validate_scene(const Scene& scene) {
  if (scene.id.empty()) throw std::invalid_argument("scene id is empty");
  if (scene.drivable_area.size() < 3 || !scene.drivable_area.is_simple()) {
    throw std::invalid_argument("drivable area must be a simple polygon");
  }
  if (!scene.drivable_area.contains({scene.ego_pose.x, scene.ego_pose.y})) {
    throw std::invalid_argument("ego start is outside the drivable area");
  }
  if (scene.route.points().size() < 2) {
    throw std::invalid_argument("route needs at least 2 points");
  }
  if (!scene.drivable_area.contains(scene.route.points().front())) {
    throw std::invalid_argument("route must start inside the drivable area");
  }
  if (!(scene.duration > 0.0)) {
    throw std::invalid_argument("scene duration must be positive");
  }
  if (!(scene.speed_limit > 0.0)) {
    throw std::invalid_argument("speed limit must be positive");
  }
  validate(scene.ego_pose);
  validate(scene.ego_status);
  for (const Agent& a : scene.agents) {
    validate(a.pose);
    if (!(a.length > 0.0) || !(a.width > 0.0)) {
      throw std::invalid_argument("agent extent must be positive");
    }
    if (!std::isfinite(a.velocity)) {
      throw std::invalid_argument("agent velocity must be finite");
    }
  }
}

}  // namespace dplan
