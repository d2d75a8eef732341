#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dplan/rng.hpp"
#include "dplan/scene.hpp"
#include "dplan/simulator.hpp"

namespace dplan {

struct ScenarioRanges {
  double lane_width_min = 3.0;
  double lane_width_max = 4.0;
  double ego_speed_max = 15.0;   // upper bound; per-kind construction below
  int agent_min = 0;
  int agent_max = 6;
  double curvature_min = 0.01;
  double curvature_max = 0.04;
  double fork_offset_min = 2.5;
  double fork_offset_max = 3.5;
};

struct CorpusSpec {
  std::uint64_t seed = 1;
  std::map<ScenarioKind, int> counts;  // ordered -> deterministic generation
  ScenarioRanges ranges;
};

CorpusSpec default_corpus_spec(std::uint64_t seed, int total_scenes);

struct GeneratedCorpus {
  std::vector<Scene> scenes;
  double oracle_pdms_floor = 1.0;  // min oracle PDMS over scenes (both fork sides)
};

// Deterministic given the spec; every scene passes validate_scene and the
// oracle feasibility gate (nc=dac=comfort=1 and PDMS >= 0.8, both detours on
// FORK scenes). Infeasible draws are resampled a bounded number of times.
GeneratedCorpus generate_corpus(const CorpusSpec& spec);

// Scripted demonstrator: curvature- and lead-aware speed profile along the
// scene's reference path. On FORK scenes variant_rng picks the left or right
// detour with probability 0.5 each.
Trajectory oracle_expert(const Scene& scene, RngStream& variant_rng,
                         int n_waypoints = 8, double dt_waypoint = 0.5);

// Deterministic variant: side = +1 takes the left detour, -1 the right
// (ignored for non-fork scenes).
Trajectory oracle_expert_variant(const Scene& scene, int side,
                                 int n_waypoints = 8, double dt_waypoint = 0.5);

// Dense reference path the oracle follows (the fork detour when side != 0).
Polyline reference_path(const Scene& scene, int side);

// JSON Lines, one scene per line, schema-versioned, numbers printed with 9
// significant digits. load(save(c)) == c because generation quantizes all
// floats through the same formatting.
void save_corpus(const std::vector<Scene>& scenes, const std::string& path);
std::vector<Scene> load_corpus(const std::string& path);

std::string scene_to_json_line(const Scene& scene);
Scene scene_from_json_line(const std::string& line);

double quantize9(double v);
std::string fmt9(double v);

}  // namespace dplan
