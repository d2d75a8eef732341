#include "dplan/checkpoint.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace dplan {

namespace {

constexpr char kMagic[8] = {'D', 'P', 'L', 'A', 'N', 'C', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

using json = nlohmann::ordered_json;

json meta_to_json(const CheckpointMeta& meta) {
  json j;
  j["denoiser"] = {{"n_waypoints", meta.denoiser.n_waypoints},
                   {"token_dim", meta.denoiser.token_dim},
                   {"heads", meta.denoiser.heads},
                   {"layers", meta.denoiser.layers},
                   {"cond_tokens", meta.denoiser.cond_tokens},
                   {"max_timestep", meta.denoiser.max_timestep},
                   {"hist_len", meta.denoiser.hist_len},
                   {"ffn_mult", meta.denoiser.ffn_mult}};
  j["featurizer"] = {{"route_samples", meta.featurizer.route_samples},
                     {"max_agents", meta.featurizer.max_agents},
                     {"token_dim", meta.featurizer.token_dim},
                     {"seed", meta.featurizer.seed}};
  j["normalization"] = {{"scale_x", meta.norm.scale_x},
                        {"scale_y", meta.norm.scale_y},
                        {"scale_heading", meta.norm.scale_heading}};
  j["trajectory"] = {{"n_waypoints", meta.traj.n_waypoints},
                     {"dt_waypoint", meta.traj.dt_waypoint},
                     {"hist_len", meta.traj.hist_len}};
  j["schedule"] = {{"steps", meta.schedule_steps},
                   {"sigma_min", meta.schedule_sigma_min}};
  return j;
}

CheckpointMeta meta_from_json(const json& j) {
  CheckpointMeta meta;
  const auto& d = j.at("denoiser");
  meta.denoiser.n_waypoints = d.at("n_waypoints").get<int>();
  meta.denoiser.token_dim = d.at("token_dim").get<int>();
  meta.denoiser.heads = d.at("heads").get<int>();
  meta.denoiser.layers = d.at("layers").get<int>();
  meta.denoiser.cond_tokens = d.at("cond_tokens").get<int>();
  meta.denoiser.max_timestep = d.at("max_timestep").get<int>();
  meta.denoiser.hist_len = d.at("hist_len").get<int>();
  meta.denoiser.ffn_mult = d.at("ffn_mult").get<int>();
  const auto& f = j.at("featurizer");
  meta.featurizer.route_samples = f.at("route_samples").get<int>();
  meta.featurizer.max_agents = f.at("max_agents").get<int>();
  meta.featurizer.token_dim = f.at("token_dim").get<int>();
  meta.featurizer.seed = f.at("seed").get<std::uint64_t>();
  const auto& n = j.at("normalization");
  meta.norm.scale_x = n.at("scale_x").get<double>();
  meta.norm.scale_y = n.at("scale_y").get<double>();
  meta.norm.scale_heading = n.at("scale_heading").get<double>();
  const auto& t = j.at("trajectory");
  meta.traj.n_waypoints = t.at("n_waypoints").get<int>();
  meta.traj.dt_waypoint = t.at("dt_waypoint").get<double>();
  meta.traj.hist_len = t.at("hist_len").get<int>();
  const auto& sc = j.at("schedule");
  meta.schedule_steps = sc.at("steps").get<int>();
  meta.schedule_sigma_min = sc.at("sigma_min").get<double>();
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const CheckpointMeta& meta) {
  json header = meta_to_json(meta);
  json table = json::array();
  for (const std::string& name : params.names()) {
    const Mat& m = params.at(name);
    table.push_back({{"name", name},
                     {"rows", static_cast<int>(m.rows())},
                     {"cols", static_cast<int>(m.cols())}});
  }
  header["params"] = std::move(table);
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t len = header_str.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_str.data(), static_cast<std::streamsize>(len));
  std::vector<double> row_major;
  for (const std::string& name : params.names()) {
    const Mat& m = params.at(name);
    row_major.resize(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        row_major[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
      }
    }
    out.write(reinterpret_cast<const char*>(row_major.data()),
              static_cast<std::streamsize>(row_major.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::pair<ParamStore, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a planner checkpoint: " + path);
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len == 0 || len > (1ull << 30)) {
    throw std::runtime_error("corrupt checkpoint header");
  }
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint header");
  const json header = json::parse(header_str);
  CheckpointMeta meta = meta_from_json(header);

  ParamStore params;
  for (const auto& entry : header.at("params")) {
    const std::string name = entry.at("name").get<std::string>();
    const int rows = entry.at("rows").get<int>();
    const int cols = entry.at("cols").get<int>();
    if (rows < 1 || cols < 1) {
      throw std::runtime_error("corrupt parameter shape for " + name);
    }
    Mat& m = params.create(name, rows, cols);
    std::vector<double> row_major(static_cast<std::size_t>(rows) * cols);
    in.read(reinterpret_cast<char*>(row_major.data()),
            static_cast<std::streamsize>(row_major.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated payload for " + name);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        m(r, c) = row_major[static_cast<std::size_t>(r) * cols + c];
      }
    }
  }
  return {std::move(params), std::move(meta)};
}

}  // namespace dplan
