#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "dplan/checkpoint.hpp"
#include "dplan/corpus.hpp"
#include "dplan/il_trainer.hpp"
#include "dplan/pipeline.hpp"
#include "dplan/rl_tuner.hpp"
#include "dplan/run_config.hpp"
#include "dplan/svg_plot.hpp"

namespace {

using dplan::fmt9;
using json = nlohmann::ordered_json;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  const char* env = std::getenv("DPLAN_CONFIG");
  args.config_path = env ? env : "";
  cmd->add_option("--config", args.config_path,
                  "Run configuration JSON (default: $DPLAN_CONFIG)");
  cmd->add_option("--set", args.overrides,
                  "Override a config field, e.g. --set rl.gamma=0.8");
}

dplan::RunConfig load(const CommonArgs& args, json* effective) {
  return dplan::load_config(args.config_path, args.overrides, effective);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string il_curve_csv(const dplan::IlResult& result) {
  std::string csv = "step,loss,lr\n";
  for (const auto& row : result.curve) {
    csv += std::to_string(row.step) + ',' + fmt9(row.loss) + ',' +
           fmt9(row.lr) + '\n';
  }
  return csv;
}

std::string rl_curve_csv(const dplan::RlResult& result) {
  std::string csv =
      "epoch,mean_reward,mean_advantage_magnitude,rl_loss,bc_loss,eval_pdms\n";
  for (const auto& row : result.curve) {
    csv += std::to_string(row.epoch) + ',' + fmt9(row.mean_reward) + ',' +
           fmt9(row.mean_abs_advantage) + ',' + fmt9(row.rl_loss) + ',' +
           fmt9(row.bc_loss) + ',' + fmt9(row.eval_pdms) + '\n';
  }
  return csv;
}

std::string report_csv(const dplan::EvalReport& report) {
  std::string csv = "scene_id,nc,dac,ttc,comfort,ep,pdms\n";
  for (const auto& sr : report.scenes) {
    csv += sr.scene_id + ',' + std::to_string(sr.breakdown.nc) + ',' +
           std::to_string(sr.breakdown.dac) + ',' +
           std::to_string(sr.breakdown.ttc) + ',' +
           std::to_string(sr.breakdown.comfort) + ',' +
           fmt9(sr.breakdown.ep) + ',' + fmt9(sr.breakdown.pdms) + '\n';
  }
  return csv;
}

json report_summary(const dplan::EvalReport& report) {
  json j;
  j["scenes"] = report.scenes.size();
  j["means"] = {{"nc", report.mean_nc},   {"dac", report.mean_dac},
                {"ttc", report.mean_ttc}, {"comfort", report.mean_comfort},
                {"ep", report.mean_ep},   {"pdms", report.mean_pdms}};
  int failures = 0;
  for (const auto& sr : report.scenes) failures += sr.failed ? 1 : 0;
  j["failed_scenes"] = failures;
  return j;
}

int run_gen_corpus(const CommonArgs& common, const std::string& out_path,
                   const std::string& salt, int scenes) {
  json effective;
  const dplan::RunConfig cfg = load(common, &effective);
  const dplan::CorpusSpec spec = cfg.corpus_spec(salt, scenes);
  const dplan::GeneratedCorpus corpus = dplan::generate_corpus(spec);
  dplan::save_corpus(corpus.scenes, out_path);

  json manifest;
  manifest["schema"] = 1;
  manifest["seed"] = spec.seed;
  manifest["salt"] = salt;
  manifest["config_hash"] = dplan::config_hash(effective);
  json counts;
  for (const auto& [kind, count] : spec.counts) {
    counts[dplan::to_string(kind)] = count;
  }
  manifest["counts"] = counts;
  manifest["n_scenes"] = corpus.scenes.size();
  manifest["oracle_pdms_floor"] = corpus.oracle_pdms_floor;
  write_text(out_path + ".manifest.json", manifest.dump(2) + "\n");
  std::printf("wrote %zu scenes to %s (oracle pdms floor %s)\n",
              corpus.scenes.size(), out_path.c_str(),
              fmt9(corpus.oracle_pdms_floor).c_str());
  return 0;
}

int run_train_il(const CommonArgs& common, const std::string& corpus_path,
                 const std::string& out_ckpt, const std::string& curve_path,
                 const std::string& summary_path) {
  json effective;
  const dplan::RunConfig cfg = load(common, &effective);
  const std::vector<dplan::Scene> scenes = dplan::load_corpus(corpus_path);
  dplan::ParamStore params = dplan::init_params(
      cfg.setup.denoiser, dplan::stream_key(cfg.master_seed, "denoiser.init"));
  const dplan::IlResult result =
      dplan::train_il(params, scenes, cfg.il, cfg.setup);
  dplan::save_checkpoint(out_ckpt, params, dplan::meta_of(cfg.setup));
  if (!curve_path.empty()) write_text(curve_path, il_curve_csv(result));

  json summary;
  summary["command"] = "train-il";
  summary["config_hash"] = dplan::config_hash(effective);
  summary["master_seed"] = cfg.master_seed;
  summary["corpus"] = std::filesystem::path(corpus_path).filename().string();
  summary["steps"] = result.curve.size();
  summary["initial_loss"] =
      result.curve.empty() ? 0.0 : result.curve.front().loss;
  summary["final_epoch_loss"] =
      result.epoch_mean_loss.empty() ? 0.0 : result.epoch_mean_loss.back();
  summary["diverged"] = result.diverged;
  if (!summary_path.empty()) write_text(summary_path, summary.dump(2) + "\n");

  if (result.diverged) {
    std::fprintf(stderr,
                 "training diverged; last good checkpoint written to %s\n",
                 out_ckpt.c_str());
    return 2;
  }
  std::printf("final epoch loss %s -> %s\n",
              fmt9(summary["final_epoch_loss"].get<double>()).c_str(),
              out_ckpt.c_str());
  return 0;
}

int run_train_rl(const CommonArgs& common, const std::string& corpus_path,
                 const std::string& init_ckpt, const std::string& out_ckpt,
                 const std::string& curve_path,
                 const std::string& summary_path,
                 const std::string& eval_corpus_path) {
  json effective;
  const dplan::RunConfig cfg = load(common, &effective);
  const std::vector<dplan::Scene> scenes = dplan::load_corpus(corpus_path);
  auto [params, meta] = dplan::load_checkpoint(init_ckpt);
  // The checkpoint's geometry wins over the config's denoiser block.
  dplan::PlannerSetup setup = dplan::setup_from_meta(meta);
  setup.sim = cfg.setup.sim;
  setup.inference_steps = cfg.setup.inference_steps;
  setup.sampling_sigma_min = cfg.setup.sampling_sigma_min;

  const dplan::ParamStore ref_params = params;
  std::vector<dplan::Scene> eval_scenes;
  if (!eval_corpus_path.empty()) {
    eval_scenes = dplan::load_corpus(eval_corpus_path);
  }
  const dplan::RlResult result =
      dplan::rl_update(params, ref_params, scenes, cfg.rl, setup,
                       eval_scenes.empty() ? nullptr : &eval_scenes);
  dplan::save_checkpoint(out_ckpt, params, meta);
  if (!curve_path.empty()) write_text(curve_path, rl_curve_csv(result));

  json summary;
  summary["command"] = "train-rl";
  summary["config_hash"] = dplan::config_hash(effective);
  summary["master_seed"] = cfg.master_seed;
  summary["corpus"] = std::filesystem::path(corpus_path).filename().string();
  summary["epochs"] = result.curve.size();
  summary["final_mean_reward"] =
      result.curve.empty() ? 0.0 : result.curve.back().mean_reward;
  summary["diverged"] = result.diverged;
  if (!summary_path.empty()) write_text(summary_path, summary.dump(2) + "\n");

  if (result.diverged) {
    std::fprintf(stderr,
                 "training diverged; last good checkpoint written to %s\n",
                 out_ckpt.c_str());
    return 2;
  }
  std::printf("final mean reward %s -> %s\n",
              fmt9(summary["final_mean_reward"].get<double>()).c_str(),
              out_ckpt.c_str());
  return 0;
}

int run_eval(const CommonArgs& common, const std::string& corpus_path,
             const std::string& ckpt_path, const std::string& baseline,
             const std::string& report_path, const std::string& summary_path,
             const std::string& svg_dir) {
  json effective;
  const dplan::RunConfig cfg = load(common, &effective);
  const std::vector<dplan::Scene> scenes = dplan::load_corpus(corpus_path);

  dplan::Planner planner;
  dplan::PlannerSetup setup = cfg.setup;
  std::string planner_name;
  if (!baseline.empty()) {
    if (baseline != "constant-velocity") {
      throw std::invalid_argument("unknown baseline: " + baseline);
    }
    planner_name = baseline;
    const int n = setup.traj.n_waypoints;
    const double dt = setup.traj.dt_waypoint;
    planner = [n, dt](const dplan::Scene& scene) {
      return dplan::constant_velocity_planner(scene, n, dt);
    };
  } else {
    if (ckpt_path.empty()) {
      throw std::invalid_argument("eval needs --ckpt or --baseline");
    }
    auto [params, meta] = dplan::load_checkpoint(ckpt_path);
    setup = dplan::setup_from_meta(meta);
    setup.sim = cfg.setup.sim;
    setup.inference_steps = cfg.setup.inference_steps;
    setup.sampling_sigma_min = cfg.setup.sampling_sigma_min;
    planner_name = std::filesystem::path(ckpt_path).filename().string();
    planner = dplan::make_diffusion_planner(
        std::make_shared<const dplan::ParamStore>(std::move(params)), setup,
        dplan::stream_key(cfg.master_seed, "eval"));
  }

  const dplan::EvalReport report = dplan::evaluate(planner, scenes, setup.sim);
  write_text(report_path, report_csv(report));
  json summary = report_summary(report);
  summary["planner"] = planner_name;
  summary["config_hash"] = dplan::config_hash(effective);
  if (!summary_path.empty()) write_text(summary_path, summary.dump(2) + "\n");

  if (!svg_dir.empty()) {
    std::filesystem::create_directories(svg_dir);
    for (const dplan::Scene& scene : scenes) {
      const dplan::Trajectory traj = planner(scene);
      const dplan::RolloutResult trace =
          dplan::rollout(scene, traj, setup.sim.dt_tick);
      dplan::write_scene_svg(
          (std::filesystem::path(svg_dir) / (scene.id + ".svg")).string(),
          scene, &traj, &trace);
    }
  }
  std::printf("mean pdms %s over %zu scenes -> %s\n",
              fmt9(report.mean_pdms).c_str(), report.scenes.size(),
              report_path.c_str());
  return 0;
}

int run_inspect_schedule(const CommonArgs& common, const std::string& out) {
  const dplan::RunConfig cfg = load(common, nullptr);
  std::string csv = "t,sigma,alpha_bar\n";
  for (int t = 1; t <= cfg.setup.schedule.steps; ++t) {
    csv += std::to_string(t) + ',' + fmt9(cfg.setup.schedule.sigma(t)) + ',' +
           fmt9(cfg.setup.schedule.alpha_bar(t)) + '\n';
  }
  if (out.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    write_text(out, csv);
  }
  return 0;
}

int run_inspect_chain(const CommonArgs& common, const std::string& corpus_path,
                      const std::string& ckpt_path,
                      const std::string& scene_id, const std::string& out) {
  const dplan::RunConfig cfg = load(common, nullptr);
  const std::vector<dplan::Scene> scenes = dplan::load_corpus(corpus_path);
  if (scenes.empty()) throw std::invalid_argument("corpus is empty");
  const dplan::Scene* scene = &scenes.front();
  if (!scene_id.empty()) {
    scene = nullptr;
    for (const dplan::Scene& s : scenes) {
      if (s.id == scene_id) scene = &s;
    }
    if (!scene) throw std::invalid_argument("scene not found: " + scene_id);
  }
  auto [params, meta] = dplan::load_checkpoint(ckpt_path);
  dplan::PlannerSetup setup = dplan::setup_from_meta(meta);
  setup.sim = cfg.setup.sim;
  setup.inference_steps = cfg.setup.inference_steps;
  setup.sampling_sigma_min = cfg.setup.sampling_sigma_min;

  dplan::ConditioningBundle cond = dplan::make_bundle(*scene, setup);
  dplan::RngStream rng = dplan::derive_stream(
      cfg.master_seed, "inspect.chain", dplan::fnv1a64(scene->id));
  const dplan::NoisePredictor predictor = [&](const dplan::Mat& x, int t) {
    cond.timestep = t;
    return dplan::predict_noise(params, x, cond, t, setup.denoiser);
  };
  const dplan::DiffusionChain chain = dplan::sample_chain(
      predictor, setup.traj.n_waypoints, setup.schedule,
      dplan::strided_timesteps(setup.schedule.steps, setup.inference_steps),
      setup.sampling_sigma_min, rng);

  auto mat_to_json = [](const dplan::Mat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(row);
    }
    return rows;
  };
  json j;
  j["scene_id"] = scene->id;
  j["timesteps"] = chain.timesteps;
  j["step_sigmas"] = chain.step_sigmas;
  json states = json::array();
  for (const dplan::Mat& s : chain.states) states.push_back(mat_to_json(s));
  j["states"] = states;
  json means = json::array();
  for (const dplan::Mat& m : chain.means) means.push_back(mat_to_json(m));
  j["means"] = means;
  const dplan::Trajectory traj = dplan::denormalize(
      chain.states.back(), setup.norm, setup.traj.dt_waypoint);
  json wps = json::array();
  for (const dplan::Waypoint& wp : traj.waypoints) {
    wps.push_back({wp.x, wp.y, wp.heading});
  }
  j["trajectory"] = wps;

  if (out.empty()) {
    std::fputs((j.dump(2) + "\n").c_str(), stdout);
  } else {
    write_text(out, j.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffusion trajectory planner pipeline"};
  app.require_subcommand(1);

  CommonArgs gen_args, il_args, rl_args, eval_args, sched_args, chain_args;

  auto* gen = app.add_subcommand("gen-corpus", "generate a scene corpus");
  add_common(gen, gen_args);
  std::string gen_out = "corpus.jsonl", gen_salt = "train";
  int gen_scenes = 0;
  gen->add_option("--out", gen_out, "output JSONL path");
  gen->add_option("--salt", gen_salt,
                  "corpus stream name (train/eval/fork/...)");
  gen->add_option("--scenes", gen_scenes,
                  "total scene count (default: config corpus.scenes)");

  auto* il = app.add_subcommand("train-il", "imitation-learn the denoiser");
  add_common(il, il_args);
  std::string il_corpus, il_out = "il.ckpt", il_curve, il_summary;
  il->add_option("--corpus", il_corpus, "training corpus")->required();
  il->add_option("--out", il_out, "output checkpoint");
  il->add_option("--curve", il_curve, "loss curve CSV");
  il->add_option("--summary", il_summary, "run summary JSON");

  auto* rl = app.add_subcommand("train-rl",
                                "fine-tune a checkpoint with the simulator");
  add_common(rl, rl_args);
  std::string rl_corpus, rl_init, rl_out = "rl.ckpt", rl_curve, rl_summary,
      rl_eval;
  rl->add_option("--corpus", rl_corpus, "training corpus")->required();
  rl->add_option("--init", rl_init, "imitation checkpoint")->required();
  rl->add_option("--out", rl_out, "output checkpoint");
  rl->add_option("--curve", rl_curve, "reward curve CSV");
  rl->add_option("--summary", rl_summary, "run summary JSON");
  rl->add_option("--eval-corpus", rl_eval, "per-epoch evaluation corpus");

  auto* ev = app.add_subcommand("eval", "score a planner on a corpus");
  add_common(ev, eval_args);
  std::string ev_corpus, ev_ckpt, ev_baseline, ev_report = "report.csv",
      ev_summary, ev_svg;
  ev->add_option("--corpus", ev_corpus, "evaluation corpus")->required();
  ev->add_option("--ckpt", ev_ckpt, "planner checkpoint");
  ev->add_option("--baseline", ev_baseline,
                 "baseline planner (constant-velocity)");
  ev->add_option("--report", ev_report, "per-scene CSV report");
  ev->add_option("--summary", ev_summary, "summary JSON");
  ev->add_option("--svg-dir", ev_svg, "write per-scene SVG plots here");

  auto* sched = app.add_subcommand("inspect-schedule",
                                   "dump the noise schedule as CSV");
  add_common(sched, sched_args);
  std::string sched_out;
  sched->add_option("--out", sched_out, "output CSV (default: stdout)");

  auto* chain = app.add_subcommand("inspect-chain",
                                   "sample and dump one denoising chain");
  add_common(chain, chain_args);
  std::string chain_corpus, chain_ckpt, chain_scene, chain_out;
  chain->add_option("--corpus", chain_corpus, "scene corpus")->required();
  chain->add_option("--ckpt", chain_ckpt, "planner checkpoint")->required();
  chain->add_option("--scene", chain_scene, "scene id (default: first)");
  chain->add_option("--out", chain_out, "output JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      return run_gen_corpus(gen_args, gen_out, gen_salt, gen_scenes);
    }
    if (il->parsed()) {
      return run_train_il(il_args, il_corpus, il_out, il_curve, il_summary);
    }
    if (rl->parsed()) {
      return run_train_rl(rl_args, rl_corpus, rl_init, rl_out, rl_curve,
                          rl_summary, rl_eval);
    }
    if (ev->parsed()) {
      return run_eval(eval_args, ev_corpus, ev_ckpt, ev_baseline, ev_report,
                      ev_summary, ev_svg);
    }
    if (sched->parsed()) {
      return run_inspect_schedule(sched_args, sched_out);
    }
    if (chain->parsed()) {
      return run_inspect_chain(chain_args, chain_corpus, chain_ckpt,
                               chain_scene, chain_out);
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
