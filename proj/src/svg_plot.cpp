#include "dplan/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "dplan/trajectory.hpp"

namespace dplan {

namespace {

struct Bounds {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();
  void add(const Vec2& p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// SVG y grows downward; scene y grows leftward. Flip y.
std::string pts_attr(const std::vector<Vec2>& pts) {
  std::string out;
  for (const Vec2& p : pts) {
    out += num(p.x) + ',' + num(-p.y) + ' ';
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string rect_polygon(const OrientedRect& r, const char* fill,
                         const char* stroke) {
  const auto corners = r.corners();
  std::string out = "<polygon points=\"";
  out += pts_attr({corners.begin(), corners.end()});
  out += "\" fill=\"";
  out += fill;
  out += "\" stroke=\"";
  out += stroke;
  out += "\" stroke-width=\"0.12\"/>\n";
  return out;
}

}  // namespace

std::string scene_svg(const Scene& scene, const Trajectory* traj,
                      const RolloutResult* rollout_trace) {
  Bounds b;
  for (const Vec2& p : scene.drivable_area.points()) b.add(p);
  for (const Vec2& p : scene.route.points()) b.add(p);
  const double pad = 4.0;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"";
  svg += num(b.min_x - pad) + ' ' + num(-(b.max_y + pad)) + ' ' +
         num(b.max_x - b.min_x + 2 * pad) + ' ' +
         num(b.max_y - b.min_y + 2 * pad) + "\">\n";

  svg += "<polygon points=\"" + pts_attr(scene.drivable_area.points()) +
         "\" fill=\"#e8e8e8\" stroke=\"#808080\" stroke-width=\"0.15\"/>\n";
  svg += "<polyline points=\"" + pts_attr(scene.route.points()) +
         "\" fill=\"none\" stroke=\"#5080c0\" stroke-width=\"0.15\" "
         "stroke-dasharray=\"1.2,1.2\"/>\n";

  for (const Agent& a : scene.agents) {
    svg += rect_polygon({{a.pose.x, a.pose.y}, a.pose.heading, a.length,
                         a.width},
                        "#d98080", "#a04040");
  }
  svg += rect_polygon({{scene.ego_pose.x, scene.ego_pose.y},
                       scene.ego_pose.heading, 4.6, 1.9},
                      "#80c080", "#208020");

  if (rollout_trace) {
    std::vector<Vec2> trace;
    trace.reserve(rollout_trace->ticks.size());
    for (const TickState& tick : rollout_trace->ticks) {
      trace.push_back({tick.ego.x, tick.ego.y});
    }
    svg += "<polyline points=\"" + pts_attr(trace) +
           "\" fill=\"none\" stroke=\"#208020\" stroke-width=\"0.2\"/>\n";
  }
  if (traj) {
    for (const Waypoint& wp : traj->waypoints) {
      const Waypoint scene_wp = to_frame(wp, scene.ego_pose);
      svg += "<circle cx=\"" + num(scene_wp.x) + "\" cy=\"" +
             num(-scene_wp.y) + "\" r=\"0.35\" fill=\"#106010\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

void write_scene_svg(const std::string& path, const Scene& scene,
                     const Trajectory* traj,
                     const RolloutResult* rollout_trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << scene_svg(scene, traj, rollout_trace);
}

}  // namespace dplan
