#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dplan/tape.hpp"
#include "dplan/trajectory.hpp"

namespace dplan {

struct DenoiserConfig {
  int n_waypoints = 8;   // N
  int token_dim = 64;    // D
  int heads = 4;
  int layers = 2;
  int cond_tokens = 16;  // L
  int max_timestep = 100;  // T
  int hist_len = 4;      // H
  int ffn_mult = 4;

  int head_dim() const { return token_dim / heads; }
  int ffn_dim() const { return token_dim * ffn_mult; }
};

void validate(const DenoiserConfig& cfg);

// Named parameter tensors with a stable creation order; the order defines the
// checkpoint layout and the gradient reduction order.
class ParamStore {
 public:
  Mat& create(const std::string& name, int rows, int cols);
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  std::size_t scalar_count() const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, Mat> tensors_;
};

// Per-parameter gradient accumulator with the same naming scheme.
class GradStore {
 public:
  explicit GradStore(const ParamStore& shapes);
  Mat& at(const std::string& name) { return grads_.at(name); }
  const Mat& at(const std::string& name) const { return grads_.at(name); }
  const std::vector<std::string>& names() const { return order_; }
  void add(const GradStore& other);
  void scale(double c);
  void set_zero();
  double max_abs() const;
  bool all_finite() const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, Mat> grads_;
};

// Binds a ParamStore to a tape, creating one leaf per parameter on demand.
class TapeParams {
 public:
  TapeParams(Tape& tape, const ParamStore& params)
      : tape_(&tape), params_(&params) {}
  Var operator()(const std::string& name);
  // Accumulate tape gradients of every bound parameter into `out`.
  void collect_grads(GradStore& out) const;

 private:
  Tape* tape_;
  const ParamStore* params_;
  std::map<std::string, Var> bound_;
};

// Everything the denoiser is conditioned on. Tokens and their pooled mean
// come from the scene featurizer and are constants; the ego status and the
// normalized history rows are embedded inside predict_noise under the
// current parameters so those encoders stay trainable.
struct ConditioningBundle {
  Mat tokens;      // L x D
  Mat pooled;      // 1 x D, column-wise mean of tokens
  EgoStatus ego;
  Mat hist;        // H x 3, normalized history waypoints
  int timestep = 0;
};

void validate_bundle(const ConditioningBundle& cond, const DenoiserConfig& cfg);

// Fresh parameters. AdaLN modulation projections and the decoder head start
// at zero so the network predicts exactly zero noise at initialization;
// randomize_all overrides that for gradient tests.
ParamStore init_params(const DenoiserConfig& cfg, std::uint64_t seed,
                       bool randomize_all = false);

// Sinusoidal features over positions/timesteps.
Mat sinusoidal_row(double pos, int dim);
Mat positional_table(int n, int dim);

// Plain (non-tape) ops used by tests and the featurizer.
Mat pool_semantic(const Mat& tokens);
Mat assemble_input(const Mat& action_tokens, const Mat& hist_embed,
                   const Mat& pooled);

// Tape-side forward pieces.
Var encode_actions(Tape& t, TapeParams& p, const Mat& x, const DenoiserConfig& cfg);
Var encode_history(Tape& t, TapeParams& p, const Mat& hist, const DenoiserConfig& cfg);
Var dit_block(Tape& t, TapeParams& p, Var seq, Var cond_tokens, Var cond_vec,
              int block_index, const DenoiserConfig& cfg);
Var predict_noise_tape(Tape& t, TapeParams& p, const Mat& x_t,
                       const ConditioningBundle& cond, int timestep,
                       const DenoiserConfig& cfg);

// Convenience forward without gradient bookkeeping.
Mat predict_noise(const ParamStore& params, const Mat& x_t,
                  const ConditioningBundle& cond, int timestep,
                  const DenoiserConfig& cfg);

// Exact reverse-mode gradient of a scalar loss built by `loss_fn`.
// Returns the loss value; gradients (zero for unused parameters) in `out`.
double gradient(const ParamStore& params,
                const std::function<Var(Tape&, TapeParams&)>& loss_fn,
                GradStore& out);

}  // namespace dplan
