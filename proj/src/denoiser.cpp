#include "dplan/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "dplan/rng.hpp"

namespace dplan {

void validate(const DenoiserConfig& cfg) {
  if (cfg.n_waypoints < 1 || cfg.token_dim < 1 || cfg.heads < 1 ||
      cfg.layers < 1 || cfg.cond_tokens < 1 || cfg.max_timestep < 1 ||
      cfg.hist_len < 1 || cfg.ffn_mult < 1) {
    throw std::invalid_argument("denoiser config counts must be >= 1");
  }
  if (cfg.token_dim % cfg.heads != 0) {
    throw std::invalid_argument("token_dim must be divisible by heads");
  }
}

Mat& ParamStore::create(const std::string& name, int rows, int cols) {
  if (tensors_.count(name)) throw std::logic_error("duplicate param " + name);
  order_.push_back(name);
  return tensors_[name] = Mat::Zero(rows, cols);
}

Mat& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no param " + name);
  return it->second;
}

const Mat& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no param " + name);
  return it->second;
}

bool ParamStore::has(const std::string& name) const {
  return tensors_.count(name) > 0;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors_) n += static_cast<std::size_t>(m.size());
  return n;
}

GradStore::GradStore(const ParamStore& shapes) : order_(shapes.names()) {
  for (const std::string& name : order_) {
    const Mat& m = shapes.at(name);
    grads_[name] = Mat::Zero(m.rows(), m.cols());
  }
}

void GradStore::add(const GradStore& other) {
  for (const std::string& name : order_) grads_[name] += other.at(name);
}

void GradStore::scale(double c) {
  for (const std::string& name : order_) grads_[name] *= c;
}

void GradStore::set_zero() {
  for (const std::string& name : order_) grads_[name].setZero();
}

double GradStore::max_abs() const {
  double m = 0.0;
  for (const auto& [name, g] : grads_) {
    if (g.size() > 0) m = std::max(m, g.cwiseAbs().maxCoeff());
  }
  return m;
}

bool GradStore::all_finite() const {
  for (const auto& [name, g] : grads_) {
    if (!g.allFinite()) return false;
  }
  return true;
}

Var TapeParams::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = tape_->input(params_->at(name), /*requires_grad=*/true);
  bound_.emplace(name, v);
  return v;
}

void TapeParams::collect_grads(GradStore& out) const {
  for (const auto& [name, var] : bound_) out.at(name) += tape_->grad(var);
}

void validate_bundle(const ConditioningBundle& cond,
                     const DenoiserConfig& cfg) {
  if (cond.tokens.rows() != cfg.cond_tokens ||
      cond.tokens.cols() != cfg.token_dim) {
    throw std::invalid_argument("bundle tokens have wrong shape");
  }
  if (cond.pooled.rows() != 1 || cond.pooled.cols() != cfg.token_dim) {
    throw std::invalid_argument("bundle pooled has wrong shape");
  }
  if (cond.hist.rows() != cfg.hist_len || cond.hist.cols() != 3) {
    throw std::invalid_argument("bundle history has wrong shape");
  }
  if (!cond.tokens.allFinite() || !cond.pooled.allFinite() ||
      !cond.hist.allFinite()) {
    throw std::invalid_argument("bundle has non-finite values");
  }
  const Mat mean = cond.tokens.colwise().mean();
  if ((mean - cond.pooled).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("bundle pooled is not the token mean");
  }
  validate(cond.ego);
}

namespace {

void fill_normal(Mat& m, RngStream& rng, double std) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std * rng.normal();
  }
}

void xavier_init(ParamStore& ps, const std::string& name, std::uint64_t seed) {
  Mat& m = ps.at(name);
  RngStream rng = derive_stream(seed, name);
  const double std =
      std::sqrt(2.0 / static_cast<double>(m.rows() + m.cols()));
  fill_normal(m, rng, std);
}

}  // namespace

ParamStore init_params(const DenoiserConfig& cfg, std::uint64_t seed,
                       bool randomize_all) {
  validate(cfg);
  const int D = cfg.token_dim;
  const int F = cfg.ffn_dim();
  ParamStore ps;

  ps.create("enc_act.w", 3, D);
  ps.create("enc_act.b", 1, D);
  ps.create("enc_hist.w1", 3 * cfg.hist_len, D);
  ps.create("enc_hist.b1", 1, D);
  ps.create("enc_hist.w2", D, D);
  ps.create("enc_hist.b2", 1, D);
  ps.create("cond.ego.w", 3, D);
  ps.create("cond.ego.b", 1, D);
  ps.create("cond.time.w", D, D);
  ps.create("cond.time.b", 1, D);
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string blk = "blk" + std::to_string(i) + ".";
    ps.create(blk + "ada.w", D, 9 * D);
    ps.create(blk + "ada.b", 1, 9 * D);
    for (const char* att : {"attn.", "xattn."}) {
      for (const char* wn : {"wq", "wk", "wv", "wo"}) {
        ps.create(blk + att + wn, D, D);
      }
      for (const char* bn : {"bq", "bk", "bv", "bo"}) {
        ps.create(blk + att + bn, 1, D);
      }
    }
    ps.create(blk + "ffn.w1", D, F);
    ps.create(blk + "ffn.b1", 1, F);
    ps.create(blk + "ffn.wg", D, F);
    ps.create(blk + "ffn.bg", 1, F);
    ps.create(blk + "ffn.w2", F, D);
    ps.create(blk + "ffn.b2", 1, D);
  }
  ps.create("head.w", D, 3);
  ps.create("head.b", 1, 3);

  for (const std::string& name : ps.names()) {
    const bool is_weight = name.find(".w") != std::string::npos;
    const bool zero_init = name.rfind("head.", 0) == 0 ||
                           name.find(".ada.") != std::string::npos;
    if (is_weight && (!zero_init || randomize_all)) {
      xavier_init(ps, name, seed);
    }
    if (randomize_all && !is_weight) {
      Mat& m = ps.at(name);
      RngStream rng = derive_stream(seed, name);
      fill_normal(m, rng, 0.05);
    }
  }
  return ps;
}

Mat sinusoidal_row(double pos, int dim) {
  Mat out(1, dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq =
        std::exp(-std::log(10000.0) * static_cast<double>(i) /
                 std::max(1, half));
    out(0, 2 * i) = std::sin(pos * freq);
    out(0, 2 * i + 1) = std::cos(pos * freq);
  }
  if (dim % 2 == 1) out(0, dim - 1) = 0.0;
  return out;
}

Mat positional_table(int n, int dim) {
  Mat out(n, dim);
  for (int k = 0; k < n; ++k) {
    out.row(k) = sinusoidal_row(static_cast<double>(k), dim);
  }
  return out;
}

Mat pool_semantic(const Mat& tokens) {
  if (tokens.rows() < 1) {
    throw std::invalid_argument("pool_semantic needs at least one token");
  }
  return tokens.colwise().mean();
}

Mat assemble_input(const Mat& action_tokens, const Mat& hist_embed,
                   const Mat& pooled) {
  const Eigen::Index D = action_tokens.cols();
  if (hist_embed.cols() != D || pooled.cols() != D || hist_embed.rows() != 1 ||
      pooled.rows() != 1) {
    throw std::invalid_argument("assemble_input width mismatch");
  }
  Mat out(action_tokens.rows() + 2, D);
  out.topRows(action_tokens.rows()) = action_tokens;
  out.row(action_tokens.rows()) = hist_embed;
  out.row(action_tokens.rows() + 1) = pooled;
  return out;
}

Var encode_actions(Tape& t, TapeParams& p, const Mat& x,
                   const DenoiserConfig& cfg) {
  if (x.rows() != cfg.n_waypoints || x.cols() != 3) {
    throw std::invalid_argument("encode_actions expects an N x 3 input");
  }
  Var tok = t.add_rowvec(t.matmul(t.constant(x), p("enc_act.w")),
                         p("enc_act.b"));
  return t.add_const(tok, positional_table(cfg.n_waypoints, cfg.token_dim));
}

Var encode_history(Tape& t, TapeParams& p, const Mat& hist,
                   const DenoiserConfig& cfg) {
  if (hist.rows() != cfg.hist_len || hist.cols() != 3) {
    throw std::invalid_argument("encode_history expects an H x 3 input");
  }
  Mat flat(1, 3 * cfg.hist_len);
  for (int i = 0; i < cfg.hist_len; ++i) {
    flat(0, 3 * i) = hist(i, 0);
    flat(0, 3 * i + 1) = hist(i, 1);
    flat(0, 3 * i + 2) = hist(i, 2);
  }
  Var h = t.add_rowvec(t.matmul(t.constant(flat), p("enc_hist.w1")),
                       p("enc_hist.b1"));
  h = t.silu(h);
  return t.add_rowvec(t.matmul(h, p("enc_hist.w2")), p("enc_hist.b2"));
}

namespace {

Var attention(Tape& t, Var q_in, Var kv_in, TapeParams& p,
              const std::string& prefix, const DenoiserConfig& cfg) {
  const int dh = cfg.head_dim();
  Var Q = t.add_rowvec(t.matmul(q_in, p(prefix + "wq")), p(prefix + "bq"));
  Var K = t.add_rowvec(t.matmul(kv_in, p(prefix + "wk")), p(prefix + "bk"));
  Var V = t.add_rowvec(t.matmul(kv_in, p(prefix + "wv")), p(prefix + "bv"));
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(cfg.heads));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < cfg.heads; ++h) {
    Var qh = t.cols(Q, h * dh, dh);
    Var kh = t.cols(K, h * dh, dh);
    Var vh = t.cols(V, h * dh, dh);
    Var scores = t.scale(t.matmul_nt(qh, kh), inv_sqrt);
    heads.push_back(t.matmul(t.softmax_rows(scores), vh));
  }
  Var cat = t.hcat(heads);
  return t.add_rowvec(t.matmul(cat, p(prefix + "wo")), p(prefix + "bo"));
}

Var ffn(Tape& t, Var x, TapeParams& p, const std::string& prefix) {
  Var a = t.silu(t.add_rowvec(t.matmul(x, p(prefix + "w1")), p(prefix + "b1")));
  Var g = t.add_rowvec(t.matmul(x, p(prefix + "wg")), p(prefix + "bg"));
  return t.add_rowvec(t.matmul(t.cmul(a, g), p(prefix + "w2")),
                      p(prefix + "b2"));
}

}  // namespace

Var dit_block(Tape& t, TapeParams& p, Var seq, Var cond_tokens, Var cond_vec,
              int block_index, const DenoiserConfig& cfg) {
  const int D = cfg.token_dim;
  const std::string blk = "blk" + std::to_string(block_index) + ".";

  Var mod = t.add_rowvec(t.matmul(t.silu(cond_vec), p(blk + "ada.w")),
                         p(blk + "ada.b"));
  auto piece = [&](int i) { return t.cols(mod, i * D, D); };

  Var h = t.modulate(t.layernorm_rows(seq), piece(0), piece(1));
  seq = t.add(seq, t.mul_rowvec(attention(t, h, h, p, blk + "attn.", cfg),
                                piece(2)));

  h = t.modulate(t.layernorm_rows(seq), piece(3), piece(4));
  seq = t.add(seq, t.mul_rowvec(
                       attention(t, h, cond_tokens, p, blk + "xattn.", cfg),
                       piece(5)));

  h = t.modulate(t.layernorm_rows(seq), piece(6), piece(7));
  seq = t.add(seq, t.mul_rowvec(ffn(t, h, p, blk + "ffn."), piece(8)));
  return seq;
}

Var predict_noise_tape(Tape& t, TapeParams& p, const Mat& x_t,
                       const ConditioningBundle& cond, int timestep,
                       const DenoiserConfig& cfg) {
  validate_bundle(cond, cfg);
  if (timestep < 0 || timestep > cfg.max_timestep) {
    throw std::invalid_argument("timestep out of range");
  }

  Var tok = encode_actions(t, p, x_t, cfg);
  Var hist_e = encode_history(t, p, cond.hist, cfg);
  Var pooled = t.constant(cond.pooled);
  Var seq = t.vcat({tok, hist_e, pooled});

  // AdaLN conditioning vector: sinusoidal timestep features plus the
  // projected ego status.
  Mat ego_raw(1, 3);
  ego_raw << cond.ego.speed, cond.ego.acceleration, cond.ego.yaw_rate;
  Var time_e = t.add_rowvec(
      t.matmul(t.constant(sinusoidal_row(timestep, cfg.token_dim)),
               p("cond.time.w")),
      p("cond.time.b"));
  Var ego_e = t.add_rowvec(t.matmul(t.constant(ego_raw), p("cond.ego.w")),
                           p("cond.ego.b"));
  Var cvec = t.add(time_e, ego_e);

  Var fh = t.constant(cond.tokens);
  for (int i = 0; i < cfg.layers; ++i) {
    seq = dit_block(t, p, seq, fh, cvec, i, cfg);
  }
  Var out = t.rows(t.layernorm_rows(seq), 0, cfg.n_waypoints);
  Var eps = t.add_rowvec(t.matmul(out, p("head.w")), p("head.b"));
  if (!eps.value().allFinite()) {
    throw std::runtime_error("denoiser produced non-finite output");
  }
  return eps;
}

Mat predict_noise(const ParamStore& params, const Mat& x_t,
                  const ConditioningBundle& cond, int timestep,
                  const DenoiserConfig& cfg) {
  Tape t;
  TapeParams p(t, params);
  return predict_noise_tape(t, p, x_t, cond, timestep, cfg).value();
}

double gradient(const ParamStore& params,
                const std::function<Var(Tape&, TapeParams&)>& loss_fn,
                GradStore& out) {
  Tape t;
  TapeParams p(t, params);
  Var loss = loss_fn(t, p);
  if (loss.value().rows() != 1 || loss.value().cols() != 1) {
    throw std::invalid_argument("loss_fn must return a scalar");
  }
  t.backward(loss);
  p.collect_grads(out);
  return loss.value()(0, 0);
}

}  // namespace dplan
