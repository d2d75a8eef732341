#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dplan/checkpoint.hpp"
#include "dplan/pipeline.hpp"

using namespace dplan;

namespace {
std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("checkpoint round trip preserves parameters and meta") {
  PlannerSetup setup = default_setup();
  setup.denoiser.token_dim = 32;
  setup.denoiser.layers = 1;
  setup.featurizer.token_dim = 32;
  setup.schedule = build_cosine_schedule(setup.denoiser.max_timestep, 0.02);
  const ParamStore params =
      init_params(setup.denoiser, 77, /*randomize_all=*/true);

  const std::string path = temp_path("dplan_ckpt_rt.bin");
  save_checkpoint(path, params, meta_of(setup));
  const auto [loaded, meta] = load_checkpoint(path);

  REQUIRE(loaded.names() == params.names());
  for (const std::string& name : params.names()) {
    CHECK((loaded.at(name).array() == params.at(name).array()).all());
  }
  CHECK(meta.denoiser.token_dim == 32);
  CHECK(meta.denoiser.layers == 1);
  CHECK(meta.schedule_steps == setup.schedule.steps);
  CHECK(meta.schedule_sigma_min == setup.schedule.sigma_min);
  CHECK(meta.norm.scale_x == setup.norm.scale_x);

  // The reloaded meta reconstructs a working setup.
  const PlannerSetup again = setup_from_meta(meta);
  CHECK(again.schedule.sigmas == setup.schedule.sigmas);
}

TEST_CASE("checkpoint loader rejects foreign and future files") {
  SUBCASE("wrong magic") {
    const std::string path = temp_path("dplan_ckpt_bad_magic.bin");
    std::ofstream(path, std::ios::binary) << "NOTACKPTxxxxyyyy";
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  }
  SUBCASE("unknown version") {
    const PlannerSetup setup = default_setup();
    const ParamStore params = init_params(setup.denoiser, 1);
    const std::string path = temp_path("dplan_ckpt_bad_ver.bin");
    save_checkpoint(path, params, meta_of(setup));
    // Bump the version field in place (offset 8, u32 little endian).
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const std::uint32_t v = 99;
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
    f.close();
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  }
  SUBCASE("truncated payload") {
    const PlannerSetup setup = default_setup();
    const ParamStore params = init_params(setup.denoiser, 1);
    const std::string path = temp_path("dplan_ckpt_trunc.bin");
    save_checkpoint(path, params, meta_of(setup));
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  }
}
