#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dplan/corpus.hpp"
#include "dplan/simulator.hpp"

using namespace dplan;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

CorpusSpec small_spec(std::uint64_t seed) {
  CorpusSpec spec;
  spec.seed = seed;
  spec.counts[ScenarioKind::Straight] = 3;
  spec.counts[ScenarioKind::Curve] = 2;
  spec.counts[ScenarioKind::IntersectionTurn] = 2;
  spec.counts[ScenarioKind::LeadBrake] = 2;
  spec.counts[ScenarioKind::Narrowing] = 1;
  spec.counts[ScenarioKind::Fork] = 2;
  return spec;
}

}  // namespace

TEST_CASE("generate_corpus honors counts and invariants") {
  const GeneratedCorpus corpus = generate_corpus(small_spec(31));
  REQUIRE(corpus.scenes.size() == 12);
  int forks = 0, straight = 0;
  for (const Scene& scene : corpus.scenes) {
    CHECK_NOTHROW(validate_scene(scene));
    if (scene.kind == ScenarioKind::Fork) ++forks;
    if (scene.kind == ScenarioKind::Straight) ++straight;
  }
  CHECK(forks == 2);
  CHECK(straight == 3);
  CHECK(corpus.oracle_pdms_floor >= 0.8);
}

TEST_CASE("corpus generation is deterministic at the byte level") {
  const GeneratedCorpus a = generate_corpus(small_spec(32));
  const GeneratedCorpus b = generate_corpus(small_spec(32));
  REQUIRE(a.scenes.size() == b.scenes.size());
  for (std::size_t i = 0; i < a.scenes.size(); ++i) {
    CHECK(scene_to_json_line(a.scenes[i]) == scene_to_json_line(b.scenes[i]));
  }
  const std::string p1 = temp_path("dplan_corpus_a.jsonl");
  const std::string p2 = temp_path("dplan_corpus_b.jsonl");
  save_corpus(a.scenes, p1);
  save_corpus(b.scenes, p2);
  std::ifstream f1(p1), f2(p2);
  const std::string s1((std::istreambuf_iterator<char>(f1)), {});
  const std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  CHECK(!s1.empty());
}

TEST_CASE("corpus save/load round trip is exact") {
  const GeneratedCorpus corpus = generate_corpus(small_spec(33));
  const std::string path = temp_path("dplan_corpus_rt.jsonl");
  save_corpus(corpus.scenes, path);
  const std::vector<Scene> loaded = load_corpus(path);
  REQUIRE(loaded.size() == corpus.scenes.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(scene_to_json_line(loaded[i]) ==
          scene_to_json_line(corpus.scenes[i]));
  }
}

TEST_CASE("corpus load errors are descriptive") {
  SUBCASE("truncated line names the line number") {
    const std::string path = temp_path("dplan_corpus_bad.jsonl");
    {
      std::ofstream out(path);
      out << scene_to_json_line(generate_corpus(small_spec(34)).scenes[0])
          << '\n';
      out << "{\"schema\":1,\"id\":\"oops\"";  // truncated
    }
    try {
      load_corpus(path);
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("unknown schema version is rejected") {
    const std::string path = temp_path("dplan_corpus_ver.jsonl");
    {
      std::ofstream out(path);
      std::string line =
          scene_to_json_line(generate_corpus(small_spec(35)).scenes[0]);
      line.replace(line.find("\"schema\":1"), 10, "\"schema\":9");
      out << line << '\n';
    }
    CHECK_THROWS_AS(load_corpus(path), std::runtime_error);
  }
}

TEST_CASE("oracle on an unobstructed straight scene at the limit matches "
          "constant velocity") {
  Scene scene;
  scene.id = "straight_cv";
  scene.kind = ScenarioKind::Straight;
  scene.drivable_area = Polygon({{-10, -3}, {130, -3}, {130, 3}, {-10, 3}});
  scene.route = Polyline({{0, 0}, {130, 0}});
  scene.ego_pose = {0, 0, 0};
  scene.ego_status = {9.0, 0, 0};
  scene.speed_limit = 9.0;
  scene.nav = NavCommand::FollowLane;
  scene.duration = 4.0;
  const Trajectory oracle = oracle_expert_variant(scene, 0);
  const Trajectory cv = constant_velocity_planner(scene, 8, 0.5);
  REQUIRE(oracle.waypoints.size() == cv.waypoints.size());
  for (std::size_t k = 0; k < cv.waypoints.size(); ++k) {
    CHECK(std::abs(oracle.waypoints[k].x - cv.waypoints[k].x) <= 1e-9);
    CHECK(std::abs(oracle.waypoints[k].y - cv.waypoints[k].y) <= 1e-9);
    CHECK(std::abs(oracle.waypoints[k].heading) <= 1e-12);
  }
}

TEST_CASE("fork scenes are bimodal with feasible detours") {
  CorpusSpec spec;
  spec.seed = 36;
  spec.counts[ScenarioKind::Fork] = 3;
  const GeneratedCorpus corpus = generate_corpus(spec);
  const SimConfig sim;
  for (const Scene& scene : corpus.scenes) {
    REQUIRE(scene.fork.has_value());
    const Trajectory left = oracle_expert_variant(scene, 1);
    const Trajectory right = oracle_expert_variant(scene, -1);

    CHECK(score_all(scene, left, sim).dac == 1);
    CHECK(score_all(scene, right, sim).dac == 1);
    double max_sep = 0.0;
    for (std::size_t k = 0; k < left.waypoints.size(); ++k) {
      max_sep = std::max(max_sep,
                         std::abs(left.waypoints[k].y - right.waypoints[k].y));
    }
    CHECK(max_sep > scene.fork->offset);

    // The averaged path drives through the obstacle footprint: the mode
    // averaging failure this scenario exists to expose.
    const Agent& obs =
        scene.agents[static_cast<std::size_t>(scene.fork->obstacle_agent)];
    const OrientedRect obstacle{{obs.pose.x, obs.pose.y}, obs.pose.heading,
                                obs.length, obs.width};
    bool mean_hits = false;
    for (std::size_t k = 0; k < left.waypoints.size(); ++k) {
      const double mx = 0.5 * (left.waypoints[k].x + right.waypoints[k].x);
      const double my = 0.5 * (left.waypoints[k].y + right.waypoints[k].y);
      const OrientedRect ego{{mx, my}, 0.0, 4.6, 1.9};
      if (rects_overlap(ego, obstacle)) mean_hits = true;
    }
    CHECK(mean_hits);
  }
}

TEST_CASE("fork variant selection is close to fair") {
  CorpusSpec spec;
  spec.seed = 37;
  spec.counts[ScenarioKind::Fork] = 1;
  const Scene scene = generate_corpus(spec).scenes[0];
  RngStream rng(9090);
  int lefts = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const Trajectory demo = oracle_expert(scene, rng);
    double mean_y = 0.0;
    for (const Waypoint& wp : demo.waypoints) mean_y += wp.y;
    if (mean_y > 0) ++lefts;
  }
  const double frac = static_cast<double>(lefts) / n;
  CHECK(frac >= 0.45);
  CHECK(frac <= 0.55);
}

TEST_CASE("quantize9 round trips through the 9-digit format") {
  for (double v : {1.0 / 3.0, 123456.789, -0.000123456789, 3.14159265358979}) {
    const double q = quantize9(v);
    CHECK(quantize9(q) == q);
    CHECK(fmt9(q) == fmt9(quantize9(q)));
  }
}
