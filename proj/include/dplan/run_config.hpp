#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "dplan/corpus.hpp"
#include "dplan/il_trainer.hpp"
#include "dplan/pipeline.hpp"
#include "dplan/rl_tuner.hpp"

namespace dplan {

// One JSON document configures the whole pipeline; cross-field consistency
// (waypoint counts, token widths, schedule horizon) is enforced at load.
struct RunConfig {
  std::uint64_t master_seed = 1;
  PlannerSetup setup;
  IlConfig il;
  RlConfig rl;
  int corpus_scenes = 200;
  ScenarioRanges ranges;

  // Seed for a named corpus draw ("train", "eval", "fork", ...).
  std::uint64_t corpus_seed(const std::string& salt) const;
  CorpusSpec corpus_spec(const std::string& salt, int scenes) const;
};

nlohmann::ordered_json default_config_json();

// Parse (defaults filled in), apply dotted-path overrides like
// "rl.gamma=0.8", validate, and return the effective document alongside.
RunConfig parse_config(const nlohmann::ordered_json& doc);
RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides,
                      nlohmann::ordered_json* effective = nullptr);

void apply_override(nlohmann::ordered_json& doc, const std::string& assignment);

// FNV-1a over the canonical serialization of the effective document.
std::string config_hash(const nlohmann::ordered_json& doc);

}  // namespace dplan
