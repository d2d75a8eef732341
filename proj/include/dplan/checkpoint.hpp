#pragma once

#include <string>
#include <utility>

#include "dplan/conditioning.hpp"
#include "dplan/denoiser.hpp"
#include "dplan/trajectory.hpp"

namespace dplan {

struct TrajectoryParams {
  int n_waypoints = 8;
  double dt_waypoint = 0.5;
  int hist_len = 4;
};

// Everything needed to reload and run a planner checkpoint.
struct CheckpointMeta {
  DenoiserConfig denoiser;
  SceneFeaturizerConfig featurizer;
  NormalizationSpec norm;
  TrajectoryParams traj;
  int schedule_steps = 100;
  double schedule_sigma_min = 0.02;
};

// Binary layout (little endian):
//   bytes 0..7   magic "DPLANCP1"
//   u32          format version (currently 1)
//   u64          JSON header length
//   ...          JSON header: meta + ordered parameter table (name/rows/cols)
//   ...          per parameter, rows*cols float64 values, row major
// Loaders reject unknown magic or versions.
void save_checkpoint(const std::string& path, const ParamStore& params,
                     const CheckpointMeta& meta);
std::pair<ParamStore, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace dplan
