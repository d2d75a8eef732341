#include <doctest.h>

#include <cmath>

#include "dplan/il_trainer.hpp"
#include "dplan/optim.hpp"

using namespace dplan;

namespace {

// Small end-to-end setup shared by the IL tests.
PlannerSetup tiny_setup() {
  PlannerSetup setup;
  setup.denoiser.n_waypoints = 8;
  setup.denoiser.token_dim = 32;
  setup.denoiser.heads = 4;
  setup.denoiser.layers = 2;
  setup.denoiser.cond_tokens = 16;
  setup.denoiser.max_timestep = 100;
  setup.denoiser.hist_len = 4;
  setup.denoiser.ffn_mult = 2;
  setup.featurizer.token_dim = 32;
  setup.schedule = build_cosine_schedule(100, 0.02);
  validate_setup(setup);
  return setup;
}

std::vector<Scene> tiny_corpus(std::uint64_t seed, int n) {
  CorpusSpec spec;
  spec.seed = seed;
  spec.counts[ScenarioKind::Straight] = n;
  return generate_corpus(spec).scenes;
}

}  // namespace

TEST_CASE("il_loss basics") {
  const PlannerSetup setup = tiny_setup();
  const std::vector<Scene> scenes = tiny_corpus(41, 2);
  const TrainingSet ts(scenes, setup);

  SUBCASE("zero-init network loss equals the mean squared noise") {
    const ParamStore params = init_params(setup.denoiser, 1);
    RngStream rng(42);
    const IlBatch batch = ts.sample_batch(16, setup.schedule, rng);
    double expected = 0.0;
    long total = 0;
    for (const IlItem& item : batch) {
      expected += item.eps.squaredNorm();
      total += item.eps.size();
    }
    expected /= static_cast<double>(total);
    const double loss = il_loss(params, batch, setup.schedule, setup.denoiser);
    CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
    // Standard-normal noise: close to 1 in expectation.
    CHECK(loss > 0.7);
    CHECK(loss < 1.3);
  }

  SUBCASE("single sample with eps 0.5 and prediction 0.1 gives 0.16") {
    // Force the prediction to a constant 0.1 through the zero-init head bias.
    ParamStore params = init_params(setup.denoiser, 1);
    params.at("head.b").setConstant(0.1);
    IlBatch batch;
    IlItem item;
    item.x0 = Mat::Zero(8, 3);
    item.cond = &ts.bundle(0);
    item.t = 10;
    item.eps = Mat::Constant(8, 3, 0.5);
    batch.push_back(std::move(item));
    const double loss = il_loss(params, batch, setup.schedule, setup.denoiser);
    CHECK(loss == doctest::Approx(0.16).epsilon(1e-12));
  }
}

TEST_CASE("one optimizer step with lr 0 is a bitwise no-op") {
  const PlannerSetup setup = tiny_setup();
  ParamStore params = init_params(setup.denoiser, 3, /*randomize_all=*/true);
  const ParamStore before = params;
  GradStore grads(params);
  for (const std::string& name : grads.names()) {
    grads.at(name).setConstant(0.37);
  }
  AdamW opt(params, {.weight_decay = 1e-4});
  opt.step(params, grads, 0.0);
  for (const std::string& name : params.names()) {
    CHECK((params.at(name).array() == before.at(name).array()).all());
  }
}

TEST_CASE("lr schedule warms up then decays to the floor") {
  const double peak = 1e-3, floor = 1e-6;
  CHECK(lr_schedule(0, 100, 0.1, peak, floor) == doctest::Approx(peak / 10));
  CHECK(lr_schedule(9, 100, 0.1, peak, floor) == doctest::Approx(peak));
  CHECK(lr_schedule(10, 100, 0.1, peak, floor) == doctest::Approx(peak));
  CHECK(lr_schedule(99, 100, 0.1, peak, floor) ==
        doctest::Approx(floor).epsilon(0.05));
  for (int s = 10; s < 99; ++s) {
    CHECK(lr_schedule(s, 100, 0.1, peak, floor) >=
          lr_schedule(s + 1, 100, 0.1, peak, floor));
  }
}

TEST_CASE("train_il is bitwise reproducible for a fixed seed") {
  const PlannerSetup setup = tiny_setup();
  const std::vector<Scene> scenes = tiny_corpus(43, 3);
  IlConfig cfg;
  cfg.epochs = 2;
  cfg.steps_per_epoch = 3;
  cfg.batch_size = 4;
  cfg.seed = 7;

  ParamStore a = init_params(setup.denoiser, 5);
  ParamStore b = init_params(setup.denoiser, 5);
  const IlResult ra = train_il(a, scenes, cfg, setup);
  const IlResult rb = train_il(b, scenes, cfg, setup);
  REQUIRE(ra.curve.size() == rb.curve.size());
  for (std::size_t i = 0; i < ra.curve.size(); ++i) {
    CHECK(ra.curve[i].loss == rb.curve[i].loss);
  }
  for (const std::string& name : a.names()) {
    CHECK((a.at(name).array() == b.at(name).array()).all());
  }
}

TEST_CASE("single-scene overfit drives the loss below 0.01") {
  PlannerSetup setup = tiny_setup();
  const std::vector<Scene> scenes = tiny_corpus(44, 1);
  IlConfig cfg;
  cfg.epochs = 10;
  cfg.steps_per_epoch = 50;
  cfg.batch_size = 8;
  cfg.lr_peak = 3e-3;
  cfg.seed = 11;

  ParamStore params = init_params(setup.denoiser, 6);
  const IlResult result = train_il(params, scenes, cfg, setup);
  REQUIRE(!result.diverged);
  CHECK(result.curve.front().loss > 0.5);

  // Measure the final loss on fresh batches.
  const TrainingSet ts(scenes, setup);
  RngStream rng(4711);
  double final_loss = 0.0;
  const int reps = 8;
  for (int i = 0; i < reps; ++i) {
    final_loss += il_loss(params, ts.sample_batch(16, setup.schedule, rng),
                          setup.schedule, setup.denoiser);
  }
  final_loss /= reps;
  CHECK(final_loss < 0.01);
}
