#include "dplan/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace dplan {

using json = nlohmann::ordered_json;

json default_config_json() {
  json j;
  j["master_seed"] = 1;
  j["trajectory"] = {{"n_waypoints", 8}, {"dt_waypoint", 0.5}, {"hist_len", 4}};
  j["normalization"] = {{"scale_x", 80.0},
                        {"scale_y", 40.0},
                        {"scale_heading", 3.141592653589793}};
  // Paper-scale runs use 100 training steps and 5 inference steps with the
  // 0.02 floor; those stay the desk defaults.
  j["scheduler"] = {{"train_steps", 100},
                    {"sigma_min", 0.02},
                    {"inference_steps", 5},
                    {"sampling_sigma_min", 0.02}};
  // Desk-scale width; the reference configuration at paper scale is
  // token_dim 1536, head size 32, 16 layers.
  j["denoiser"] = {{"token_dim", 80}, {"heads", 5}, {"layers", 2},
                   {"ffn_mult", 4}};
  j["conditioning"] = {{"route_samples", 8}, {"max_agents", 6},
                       {"seed", 9001}};
  // Paper stage II: lr 1e-4, batch 512, 200 epochs; desk defaults below.
  j["il"] = {{"epochs", 40},       {"steps_per_epoch", 50},
             {"batch_size", 96},   {"lr_peak", 1.2e-3},
             {"lr_floor", 1e-6},   {"warmup_frac", 0.05},
             {"weight_decay", 1e-4}};
  // Paper stage III: gamma 0.6, bc weight 0.01, min sampling 0.02, log-prob
  // floor 0.10, 10 epochs, batch 128 (desk: 16 scenes/batch).
  j["rl"] = {{"group_size", 8},
             {"gamma", 0.6},
             {"lambda_bc", 0.01},
             {"sampling_sigma_min", 0.02},
             {"logprob_sigma_floor", 0.10},
             {"chain_steps", 5},
             {"epochs", 10},
             {"batch_scenes", 16},
             {"lr", 1e-4},
             {"weight_decay", 0.0},
             {"adv_epsilon", 1e-8}};
  j["simulator"] = {{"dt_tick", 0.1},
                    {"ttc_tau", 1.0},
                    {"nc_speed_threshold", 0.1},
                    {"ego_length", 4.6},
                    {"ego_width", 1.9},
                    {"comfort",
                     {{"max_abs_lon_accel", 4.0},
                      {"max_abs_lat_accel", 4.9},
                      {"max_abs_jerk", 8.4},
                      {"max_abs_yaw_rate", 0.95},
                      {"window_s", 0.5}}}};
  j["corpus"] = {{"scenes", 200},
                 {"ranges",
                  {{"lane_width_min", 3.0},
                   {"lane_width_max", 4.0},
                   {"ego_speed_max", 15.0},
                   {"agent_min", 0},
                   {"agent_max", 6},
                   {"curvature_min", 0.01},
                   {"curvature_max", 0.04},
                   {"fork_offset_min", 2.5},
                   {"fork_offset_max", 3.5}}}};
  return j;
}

namespace {

void merge_defaults(json& doc, const json& defaults) {
  for (const auto& [key, value] : defaults.items()) {
    if (!doc.contains(key)) {
      doc[key] = value;
    } else if (value.is_object() && doc[key].is_object()) {
      merge_defaults(doc[key], value);
    }
  }
}

void reject_unknown(const json& doc, const json& defaults,
                    const std::string& prefix) {
  for (const auto& [key, value] : doc.items()) {
    if (!defaults.contains(key)) {
      throw std::invalid_argument("unknown config field: " + prefix + key);
    }
    if (value.is_object() && defaults.at(key).is_object()) {
      reject_unknown(value, defaults.at(key), prefix + key + ".");
    }
  }
}

}  // namespace

RunConfig parse_config(const json& doc_in) {
  json doc = doc_in;
  const json defaults = default_config_json();
  reject_unknown(doc, defaults, "");
  merge_defaults(doc, defaults);

  RunConfig cfg;
  cfg.master_seed = doc.at("master_seed").get<std::uint64_t>();

  const auto& tj = doc.at("trajectory");
  cfg.setup.traj.n_waypoints = tj.at("n_waypoints").get<int>();
  cfg.setup.traj.dt_waypoint = tj.at("dt_waypoint").get<double>();
  cfg.setup.traj.hist_len = tj.at("hist_len").get<int>();

  const auto& nj = doc.at("normalization");
  cfg.setup.norm = {nj.at("scale_x").get<double>(),
                    nj.at("scale_y").get<double>(),
                    nj.at("scale_heading").get<double>()};

  const auto& sj = doc.at("scheduler");
  cfg.setup.schedule = build_cosine_schedule(sj.at("train_steps").get<int>(),
                                             sj.at("sigma_min").get<double>());
  cfg.setup.inference_steps = sj.at("inference_steps").get<int>();
  cfg.setup.sampling_sigma_min = sj.at("sampling_sigma_min").get<double>();

  const auto& dj = doc.at("denoiser");
  cfg.setup.denoiser.n_waypoints = cfg.setup.traj.n_waypoints;
  cfg.setup.denoiser.hist_len = cfg.setup.traj.hist_len;
  cfg.setup.denoiser.token_dim = dj.at("token_dim").get<int>();
  cfg.setup.denoiser.heads = dj.at("heads").get<int>();
  cfg.setup.denoiser.layers = dj.at("layers").get<int>();
  cfg.setup.denoiser.ffn_mult = dj.at("ffn_mult").get<int>();
  cfg.setup.denoiser.max_timestep = cfg.setup.schedule.steps;

  const auto& cj = doc.at("conditioning");
  cfg.setup.featurizer.route_samples = cj.at("route_samples").get<int>();
  cfg.setup.featurizer.max_agents = cj.at("max_agents").get<int>();
  cfg.setup.featurizer.seed = cj.at("seed").get<std::uint64_t>();
  cfg.setup.featurizer.token_dim = cfg.setup.denoiser.token_dim;
  cfg.setup.denoiser.cond_tokens = cfg.setup.featurizer.tokens();

  const auto& ij = doc.at("il");
  cfg.il.epochs = ij.at("epochs").get<int>();
  cfg.il.steps_per_epoch = ij.at("steps_per_epoch").get<int>();
  cfg.il.batch_size = ij.at("batch_size").get<int>();
  cfg.il.lr_peak = ij.at("lr_peak").get<double>();
  cfg.il.lr_floor = ij.at("lr_floor").get<double>();
  cfg.il.warmup_frac = ij.at("warmup_frac").get<double>();
  cfg.il.weight_decay = ij.at("weight_decay").get<double>();
  cfg.il.seed = stream_key(cfg.master_seed, "il");

  const auto& rj = doc.at("rl");
  cfg.rl.group_size = rj.at("group_size").get<int>();
  cfg.rl.gamma = rj.at("gamma").get<double>();
  cfg.rl.lambda_bc = rj.at("lambda_bc").get<double>();
  cfg.rl.sampling_sigma_min = rj.at("sampling_sigma_min").get<double>();
  cfg.rl.logprob_sigma_floor = rj.at("logprob_sigma_floor").get<double>();
  cfg.rl.chain_steps = rj.at("chain_steps").get<int>();
  cfg.rl.epochs = rj.at("epochs").get<int>();
  cfg.rl.batch_scenes = rj.at("batch_scenes").get<int>();
  cfg.rl.lr = rj.at("lr").get<double>();
  cfg.rl.weight_decay = rj.at("weight_decay").get<double>();
  cfg.rl.adv_epsilon = rj.at("adv_epsilon").get<double>();
  cfg.rl.seed = stream_key(cfg.master_seed, "rl");

  const auto& mj = doc.at("simulator");
  cfg.setup.sim.dt_tick = mj.at("dt_tick").get<double>();
  cfg.setup.sim.ttc_tau = mj.at("ttc_tau").get<double>();
  cfg.setup.sim.nc_speed_threshold = mj.at("nc_speed_threshold").get<double>();
  cfg.setup.sim.ego.length = mj.at("ego_length").get<double>();
  cfg.setup.sim.ego.width = mj.at("ego_width").get<double>();
  const auto& cm = mj.at("comfort");
  cfg.setup.sim.comfort.max_abs_lon_accel =
      cm.at("max_abs_lon_accel").get<double>();
  cfg.setup.sim.comfort.max_abs_lat_accel =
      cm.at("max_abs_lat_accel").get<double>();
  cfg.setup.sim.comfort.max_abs_jerk = cm.at("max_abs_jerk").get<double>();
  cfg.setup.sim.comfort.max_abs_yaw_rate =
      cm.at("max_abs_yaw_rate").get<double>();
  cfg.setup.sim.comfort.window_s = cm.at("window_s").get<double>();

  const auto& kj = doc.at("corpus");
  cfg.corpus_scenes = kj.at("scenes").get<int>();
  const auto& rr = kj.at("ranges");
  cfg.ranges.lane_width_min = rr.at("lane_width_min").get<double>();
  cfg.ranges.lane_width_max = rr.at("lane_width_max").get<double>();
  cfg.ranges.ego_speed_max = rr.at("ego_speed_max").get<double>();
  cfg.ranges.agent_min = rr.at("agent_min").get<int>();
  cfg.ranges.agent_max = rr.at("agent_max").get<int>();
  cfg.ranges.curvature_min = rr.at("curvature_min").get<double>();
  cfg.ranges.curvature_max = rr.at("curvature_max").get<double>();
  cfg.ranges.fork_offset_min = rr.at("fork_offset_min").get<double>();
  cfg.ranges.fork_offset_max = rr.at("fork_offset_max").get<double>();

  validate_setup(cfg.setup);
  validate(cfg.il);
  validate(cfg.rl);
  return cfg;
}

std::uint64_t RunConfig::corpus_seed(const std::string& salt) const {
  return stream_key(master_seed, "corpus", fnv1a64(salt));
}

CorpusSpec RunConfig::corpus_spec(const std::string& salt, int scenes) const {
  CorpusSpec spec = default_corpus_spec(corpus_seed(salt),
                                        scenes > 0 ? scenes : corpus_scenes);
  spec.ranges = ranges;
  return spec;
}

void apply_override(json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override must look like path.to.field=value: " +
                                assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw std::invalid_argument("empty key in " + assignment);
    if (dot == std::string::npos) {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const json::parse_error&) {
        parsed = value;  // plain string
      }
      (*node)[key] = parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides,
                      json* effective) {
  json doc;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path);
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("config parse error in " + path + ": " +
                                  e.what());
    }
  } else {
    doc = json::object();
  }
  for (const std::string& o : overrides) apply_override(doc, o);
  const json defaults = default_config_json();
  reject_unknown(doc, defaults, "");
  merge_defaults(doc, defaults);
  RunConfig cfg = parse_config(doc);
  if (effective) *effective = doc;
  return cfg;
}

std::string config_hash(const json& doc) {
  const std::string dump = doc.dump();
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(dump)));
  return buf;
}

}  // namespace dplan
