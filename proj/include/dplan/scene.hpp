#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dplan/geometry.hpp"
#include "dplan/trajectory.hpp"

namespace dplan {

enum class NavCommand { FollowLane, TurnLeft, TurnRight, Stop };

const char* to_string(NavCommand nav);
NavCommand nav_from_string(const std::string& s);

enum class ScenarioKind {
  Straight,
  Curve,
  IntersectionTurn,
  LeadBrake,
  Narrowing,
  Fork
};

const char* to_string(ScenarioKind kind);
ScenarioKind kind_from_string(const std::string& s);

// Background traffic participant; non-reactive, moves at constant velocity
// along its fixed heading.
struct Agent {
  int id = 0;
  Waypoint pose;
  double velocity = 0.0;  // m/s along heading
  double length = 4.6;
  double width = 1.9;
};

// Geometry present only on FORK scenes: a blocking agent on the centerline
// and the lateral offset / arc-length window of the two equal-length detours.
struct ForkInfo {
  int obstacle_agent = 0;
  double offset = 3.0;
  double detour_start_s = 0.0;
  double detour_end_s = 0.0;
};

// World state for one evaluation episode, in a local scene frame anchored at
// the initial ego pose.
struct Scene {
  std::string id;
  ScenarioKind kind = ScenarioKind::Straight;
  Polygon drivable_area;
  Polyline route;
  Waypoint ego_pose;
  EgoStatus ego_status;
  std::vector<Agent> agents;
  NavCommand nav = NavCommand::FollowLane;
  double speed_limit = 15.0;
  double duration = 4.0;
  std::optional<ForkInfo> fork;
};

void validate_scene(const Scene& scene);

}  // namespace dplan
