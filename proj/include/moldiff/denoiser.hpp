//
// Copyright 2026 the moldiff authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "moldiff/diffusion.hpp"
#include "moldiff/graphdist.hpp"
#include "moldiff/nn.hpp"
#include "moldiff/schedule.hpp"

namespace moldiff {

struct DenoiserConfig {
  int n_layers = 4;
  int n_heads = 4;
  int d_v = 64;
  int d_e = 32;
  int d_g = 64;
  int d_cond = 64;
  int k_v = 0;  // node vocabulary size, set from the Vocabulary
  int k_e = kNumEdgeCategories;

  // paper-scale reference: n_layers=12, n_heads=4, (d_v,d_e,d_g)=(128,64,128)

  void validate() const {
    require(k_v > 0 && k_e > 0, errc::bad_config, "denoiser config: vocabulary sizes unset");
    require(d_v % n_heads == 0, errc::bad_config, "denoiser config: d_v must divide by heads");
    require(n_layers >= 0, errc::bad_config, "denoiser config: negative layer count");
  }

  nlohmann::json to_json() const {
    return {{"n_layers", n_layers}, {"n_heads", n_heads}, {"d_v", d_v},   {"d_e", d_e},
            {"d_g", d_g},           {"d_cond", d_cond},   {"k_v", k_v},   {"k_e", k_e}};
  }

  static DenoiserConfig from_json(const nlohmann::json& j) {
    DenoiserConfig c;
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_v = j.at("d_v").get<int>();
    c.d_e = j.at("d_e").get<int>();
    c.d_g = j.at("d_g").get<int>();
    c.d_cond = j.at("d_cond").get<int>();
    c.k_v = j.at("k_v").get<int>();
    c.k_e = j.at("k_e").get<int>();
    return c;
  }
};

inline constexpr int kNumStructFeatures = 6;

/// Per-node structural input features from the expected weighted adjacency:
/// degree, expected total bond order, and closed-walk counts of length 3..6.
/// Auxiliary input only; gradients never flow through these.
inline Eigen::MatrixXd structural_features(const GraphDistribution& g) {
  const int n = g.n;
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd valence = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int p = pair_index(n, i, j);
      const double bond_p = 1.0 - g.edge_probs(p, kBondNone);
      adj(i, j) = adj(j, i) = bond_p;
      double order = 0.0;
      for (int k = 1; k < g.edge_probs.cols(); ++k) order += k * g.edge_probs(p, k);
      valence(i, j) = valence(j, i) = order;
    }
  }
  Eigen::MatrixXd a2 = adj * adj;
  Eigen::MatrixXd a3 = a2 * adj;
  Eigen::MatrixXd a4 = a3 * adj;
  Eigen::MatrixXd a5 = a4 * adj;
  Eigen::MatrixXd a6 = a5 * adj;
  Eigen::MatrixXd out(n, kNumStructFeatures);
  for (int i = 0; i < n; ++i) {
    out(i, 0) = adj.row(i).sum() / 4.0;
    out(i, 1) = valence.row(i).sum() / 4.0;
    out(i, 2) = a3(i, i) / 2.0;
    out(i, 3) = a4(i, i) / 8.0;
    out(i, 4) = a5(i, i) / 32.0;
    out(i, 5) = a6(i, i) / 128.0;
  }
  return out;
}

/// Noise-conditioned graph attention denoiser predicting the clean graph
/// p(x_0 | G_t). Node stream uses FiLM from global and incident-edge
/// features; edge stream is driven by the symmetrized attention scores of
/// its endpoints; every stream update passes a gated residual.
class DenoiserModel {
 public:
  DenoiserModel(DenoiserConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    register_params();
    initialize(init_seed);
  }

  const DenoiserConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct Forward {
    int node_logits = -1;
    int edge_logits = -1;
    TapeParams tp;
  };

  /// Builds the forward computation. Inputs are treated as constants; set up
  /// differentiable inputs is not needed for the denoiser (guidance
  /// differentiates the classifier instead).
  Forward forward(Tape& tape, const GraphDistribution& gt, int t,
                  const NoiseSchedule& schedule) const {
    require(gt.node_probs.cols() == cfg_.k_v && gt.edge_probs.cols() == cfg_.k_e,
            errc::shape_mismatch, "denoiser forward: vocabulary size mismatch");
    require(t >= 1 && t <= schedule.T, errc::step_out_of_range,
            "denoiser forward: step out of range");
    TapeParams tp(tape, params_);
    const int n = gt.n;
    const int m = pair_count(n);
    const double abar = schedule.alpha_bar_at(t);

    // inputs
    Eigen::MatrixXd xv(n, cfg_.k_v + kNumStructFeatures);
    xv << gt.node_probs, structural_features(gt);
    const int xv_id = tape.constant(std::move(xv));
    const int xe_id = tape.constant(gt.edge_probs);

    // noise conditioning vectors
    const int cv = cond_mlp(tape, tp, "cond.v", abar);
    const int ce = cond_mlp(tape, tp, "cond.e", abar);

    // embeddings
    int fv = apply_linear(tape, tp, lin("embed.node"), xv_id);
    int fe = apply_linear(tape, tp, lin("embed.edge"), xe_id);

    // global stream init from mean pools and (noise, size) descriptors
    const int mean_v = tape.matmul(
        tape.constant(Eigen::MatrixXd::Constant(1, n, 1.0 / n)), fv);
    const int mean_e =
        m > 0 ? tape.matmul(tape.constant(Eigen::MatrixXd::Constant(1, m, 1.0 / m)), fe)
              : tape.constant(Eigen::MatrixXd::Zero(1, cfg_.d_e));
    Eigen::MatrixXd gin(1, 2);
    gin << abar, n / 16.0;
    int fg = tape.silu(tape.add_rowvec(
        tape.add(tape.add(tape.matmul(mean_v, tp.node(slot("embed.global.wv"))),
                          tape.matmul(mean_e, tp.node(slot("embed.global.we")))),
                 tape.matmul(tape.constant(std::move(gin)), tp.node(slot("embed.global.wc")))),
        tp.node(slot("embed.global.b"))));

    // constant broadcast / pooling operators
    const int ones_n = tape.constant(Eigen::MatrixXd::Ones(n, 1));
    const int ones_m = tape.constant(Eigen::MatrixXd::Ones(std::max(m, 0), 1));
    Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(n, m);
    if (n > 1) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (j != i) inc(i, pair_index(n, i, j)) = 1.0 / (n - 1);
        }
      }
    }
    const int inc_id = tape.constant(std::move(inc));

    const int dh = cfg_.d_v / cfg_.n_heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    for (int l = 0; l < cfg_.n_layers; ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";

      // adaptive normalization conditioned on the noise vectors
      const int hv = modulate_rows(tape, tp, tape.layer_norm_rows(fv), cv, pre + "adaln.v", ones_n);
      const int he = modulate_rows(tape, tp, tape.layer_norm_rows(fe), ce, pre + "adaln.e", ones_m);

      // multi-head attention with edge-modulated scores
      std::vector<int> head_scores(cfg_.n_heads);
      int attn_v = -1;
      for (int h = 0; h < cfg_.n_heads; ++h) {
        const std::string hp = pre + "attn.h" + std::to_string(h) + ".";
        const int q = tape.matmul(hv, tp.node(slot(hp + "wq")));
        const int k = tape.matmul(hv, tp.node(slot(hp + "wk")));
        const int v = tape.matmul(hv, tp.node(slot(hp + "wv")));
        int scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_dh);
        if (m > 0) {
          const int emul = tape.sym_from_upper(tape.matmul(he, tp.node(slot(hp + "emul"))), n);
          const int eadd = tape.sym_from_upper(tape.matmul(he, tp.node(slot(hp + "eadd"))), n);
          scores = tape.add(tape.add(scores, tape.mul(scores, emul)), eadd);
        }
        head_scores[h] = scores;
        const int out_h = tape.matmul(tape.matmul(tape.softmax_rows(scores), v),
                                      tp.node(slot(hp + "wo")));
        attn_v = h == 0 ? out_h : tape.add(attn_v, out_h);
      }
      attn_v = tape.add_rowvec(attn_v, tp.node(slot(pre + "attn.b")));

      // node FiLM from global and aggregated incident-edge features
      const int g_rows = tape.matmul(ones_n, fg);
      const int e_inc = tape.matmul(inc_id, he);
      const int film_scale = tape.add_rowvec(
          tape.add(tape.matmul(g_rows, tp.node(slot(pre + "film.v.s.wg"))),
                   tape.matmul(e_inc, tp.node(slot(pre + "film.v.s.we")))),
          tp.node(slot(pre + "film.v.s.b")));
      const int film_shift = tape.add_rowvec(
          tape.add(tape.matmul(g_rows, tp.node(slot(pre + "film.v.b.wg"))),
                   tape.matmul(e_inc, tp.node(slot(pre + "film.v.b.we")))),
          tp.node(slot(pre + "film.v.b.b")));
      const int upd_v =
          tape.add(tape.add(attn_v, tape.mul(attn_v, film_scale)), film_shift);

      // gated residual for the node stream
      const int gate_v = apply_linear(tape, tp, lin(pre + "gate.v"), cv);  // 1 x d_v
      fv = tape.add(fv, tape.mul(tape.matmul(ones_n, gate_v), upd_v));

      if (m > 0) {
        // edge update from endpoint attention scores plus its own FiLM
        int edge_in = tape.matmul(tape.upper_mean_sym(head_scores[0]),
                                  tp.node(slot(pre + "edge.wscore.h0")));
        for (int h = 1; h < cfg_.n_heads; ++h) {
          edge_in = tape.add(edge_in,
                             tape.matmul(tape.upper_mean_sym(head_scores[h]),
                                         tp.node(slot(pre + "edge.wscore.h" + std::to_string(h)))));
        }
        edge_in = tape.add_rowvec(
            tape.add(edge_in, tape.matmul(he, tp.node(slot(pre + "edge.wself")))),
            tp.node(slot(pre + "edge.b")));
        const int upd_e =
            modulate_rows(tape, tp, tape.silu(edge_in), ce, pre + "film.e", ones_m);
        const int gate_e = apply_linear(tape, tp, lin(pre + "gate.e"), ce);
        fe = tape.add(fe, tape.mul(tape.matmul(ones_m, gate_e), upd_e));
      }

      // global update inside the block (ungated)
      const int mv = tape.matmul(tape.constant(Eigen::MatrixXd::Constant(1, n, 1.0 / n)), fv);
      const int me =
          m > 0 ? tape.matmul(tape.constant(Eigen::MatrixXd::Constant(1, m, 1.0 / m)), fe)
                : tape.constant(Eigen::MatrixXd::Zero(1, cfg_.d_e));
      fg = tape.add(
          fg, tape.silu(tape.add_rowvec(
                  tape.add(tape.add(tape.matmul(mv, tp.node(slot(pre + "glob.wv"))),
                                    tape.matmul(me, tp.node(slot(pre + "glob.we")))),
                           tape.matmul(fg, tp.node(slot(pre + "glob.wg")))),
                  tp.node(slot(pre + "glob.b")))));
    }

    Forward out{-1, -1, tp};
    out.node_logits = apply_linear(tape, tp, lin("head.node"), tape.layer_norm_rows(fv));
    out.edge_logits = apply_linear(tape, tp, lin("head.edge"), tape.layer_norm_rows(fe));
    out.tp = tp;
    return out;
  }

  /// Softmax x0 prediction for a (possibly simplex-valued) noisy graph.
  GraphDistribution predict_x0(const GraphDistribution& gt, int t,
                               const NoiseSchedule& schedule) const {
    Tape tape;
    Forward f = forward(tape, gt, t, schedule);
    GraphDistribution out = gt;
    out.node_probs = softmax_rows_eval(tape.val(f.node_logits));
    out.edge_probs = softmax_rows_eval(tape.val(f.edge_logits));
    return out;
  }

  /// Dense conditioning vectors from the per-space noise levels (alpha_bar).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> noise_embed(double noise_v, double noise_e) const {
    require(noise_v >= 0.0 && noise_v <= 1.0 && noise_e >= 0.0 && noise_e <= 1.0,
            errc::bad_config, "noise_embed: noise levels must lie in [0,1]");
    Tape tape;
    TapeParams tp(tape, params_);
    const int cv = cond_mlp(tape, tp, "cond.v", noise_v);
    const int ce = cond_mlp(tape, tp, "cond.e", noise_e);
    return {tape.val(cv).row(0).transpose(), tape.val(ce).row(0).transpose()};
  }

  static Eigen::MatrixXd softmax_rows_eval(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out = logits;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double mx = out.row(r).maxCoeff();
      out.row(r) = (out.row(r).array() - mx).exp().matrix();
      out.row(r) /= out.row(r).sum();
    }
    return out;
  }

 private:
  DenoiserConfig cfg_;
  ParamStore params_;

  int slot(const std::string& name) const { return params_.slot(name); }

  LinearSlots lin(const std::string& name) const {
    return {params_.slot(name + ".w"), params_.slot(name + ".b")};
  }

  /// y * (1 + s(c)) + b(c) with s, b generated from the conditioning row.
  int modulate_rows(Tape& tape, TapeParams& tp, int y, int cond, const std::string& pre,
                    int ones_rows) const {
    const int s = apply_linear(tape, tp, lin(pre + ".s"), cond);  // 1 x d
    const int b = apply_linear(tape, tp, lin(pre + ".b"), cond);
    const int scale = tape.matmul(ones_rows, s);
    const int shift = tape.matmul(ones_rows, b);
    return tape.add(tape.add(y, tape.mul(y, scale)), shift);
  }

  int cond_mlp(Tape& tape, TapeParams& tp, const std::string& pre, double level) const {
    Eigen::MatrixXd in(1, 1);
    in(0, 0) = level;
    const int x = tape.constant(std::move(in));
    const int h = tape.silu(apply_linear(tape, tp, lin(pre + ".l1"), x));
    return apply_linear(tape, tp, lin(pre + ".l2"), h);
  }

  void register_params() {
    const int kv_in = cfg_.k_v + kNumStructFeatures;
    add_linear(params_, "embed.node", kv_in, cfg_.d_v);
    add_linear(params_, "embed.edge", cfg_.k_e, cfg_.d_e);
    params_.add("embed.global.wv", cfg_.d_v, cfg_.d_g);
    params_.add("embed.global.we", cfg_.d_e, cfg_.d_g);
    params_.add("embed.global.wc", 2, cfg_.d_g);
    params_.add("embed.global.b", 1, cfg_.d_g);
    add_linear(params_, "cond.v.l1", 1, cfg_.d_cond);
    add_linear(params_, "cond.v.l2", cfg_.d_cond, cfg_.d_cond);
    add_linear(params_, "cond.e.l1", 1, cfg_.d_cond);
    add_linear(params_, "cond.e.l2", cfg_.d_cond, cfg_.d_cond);

    const int dh = cfg_.d_v / cfg_.n_heads;
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";
      add_linear(params_, pre + "adaln.v.s", cfg_.d_cond, cfg_.d_v);
      add_linear(params_, pre + "adaln.v.b", cfg_.d_cond, cfg_.d_v);
      add_linear(params_, pre + "adaln.e.s", cfg_.d_cond, cfg_.d_e);
      add_linear(params_, pre + "adaln.e.b", cfg_.d_cond, cfg_.d_e);
      for (int h = 0; h < cfg_.n_heads; ++h) {
        const std::string hp = pre + "attn.h" + std::to_string(h) + ".";
        params_.add(hp + "wq", cfg_.d_v, dh);
        params_.add(hp + "wk", cfg_.d_v, dh);
        params_.add(hp + "wv", cfg_.d_v, dh);
        params_.add(hp + "wo", dh, cfg_.d_v);
        params_.add(hp + "emul", cfg_.d_e, 1);
        params_.add(hp + "eadd", cfg_.d_e, 1);
        params_.add(pre + "edge.wscore.h" + std::to_string(h), 1, cfg_.d_e);
      }
      params_.add(pre + "attn.b", 1, cfg_.d_v);
      params_.add(pre + "film.v.s.wg", cfg_.d_g, cfg_.d_v);
      params_.add(pre + "film.v.s.we", cfg_.d_e, cfg_.d_v);
      params_.add(pre + "film.v.s.b", 1, cfg_.d_v);
      params_.add(pre + "film.v.b.wg", cfg_.d_g, cfg_.d_v);
      params_.add(pre + "film.v.b.we", cfg_.d_e, cfg_.d_v);
      params_.add(pre + "film.v.b.b", 1, cfg_.d_v);
      add_linear(params_, pre + "gate.v", cfg_.d_cond, cfg_.d_v);
      params_.add(pre + "edge.wself", cfg_.d_e, cfg_.d_e);
      params_.add(pre + "edge.b", 1, cfg_.d_e);
      add_linear(params_, pre + "film.e.s", cfg_.d_cond, cfg_.d_e);
      add_linear(params_, pre + "film.e.b", cfg_.d_cond, cfg_.d_e);
      add_linear(params_, pre + "gate.e", cfg_.d_cond, cfg_.d_e);
      params_.add(pre + "glob.wv", cfg_.d_v, cfg_.d_g);
      params_.add(pre + "glob.we", cfg_.d_e, cfg_.d_g);
      params_.add(pre + "glob.wg", cfg_.d_g, cfg_.d_g);
      params_.add(pre + "glob.b", 1, cfg_.d_g);
    }
    add_linear(params_, "head.node", cfg_.d_v, cfg_.k_v);
    add_linear(params_, "head.edge", cfg_.d_e, cfg_.k_e);
  }

  void initialize(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x6d6f6c64ULL));
    for (int s = 0; s < params_.size(); ++s) {
      const std::string& name = params_.name(s);
      // gates and modulation generators start at zero: first forward passes
      // embeddings straight to the heads
      if (name.find(".gate.") != std::string::npos ||
          name.find("adaln.") != std::string::npos ||
          name.find("film.") != std::string::npos || name.ends_with(".b")) {
        params_.value(s).setZero();
        continue;
      }
      init_xavier(params_.value(s), rng);
    }
  }
};

/// Mean node cross-entropy plus weighted mean edge cross-entropy against a
/// one-hot clean graph. Plain-matrix evaluation.
inline double denoiser_loss(const Eigen::MatrixXd& node_logits, const Eigen::MatrixXd& edge_logits,
                            const GraphDistribution& x0_true, double edge_weight = 5.0) {
  require(node_logits.rows() == x0_true.node_probs.rows() &&
              node_logits.cols() == x0_true.node_probs.cols() &&
              edge_logits.rows() == x0_true.edge_probs.rows() &&
              edge_logits.cols() == x0_true.edge_probs.cols(),
          errc::shape_mismatch, "denoiser_loss: shape mismatch");
  auto ce_block = [](const Eigen::MatrixXd& logits, const Eigen::MatrixXd& target) {
    if (logits.rows() == 0) return 0.0;
    double total = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double mx = logits.row(r).maxCoeff();
      const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
      total += lse - logits.row(r).dot(target.row(r));
    }
    return total / static_cast<double>(logits.rows());
  };
  return ce_block(node_logits, x0_true.node_probs) +
         edge_weight * ce_block(edge_logits, x0_true.edge_probs);
}

struct DenoiserTrainOptions {
  int epochs = 200;
  int batch_size = 64;
  double lr = 1e-3;
  double edge_loss_weight = 5.0;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

namespace detail {

/// Tape cross-entropy loss node against one-hot targets.
inline int tape_ce_loss(Tape& tape, int node_logits, int edge_logits,
                        const GraphDistribution& x0, double edge_weight) {
  const int n = static_cast<int>(x0.node_probs.rows());
  const int m = static_cast<int>(x0.edge_probs.rows());
  const int node_lp = tape.log_softmax_rows(node_logits);
  int loss = tape.scale(tape.sum_all(tape.mul(node_lp, tape.constant(x0.node_probs))),
                        -1.0 / std::max(n, 1));
  if (m > 0) {
    const int edge_lp = tape.log_softmax_rows(edge_logits);
    const int edge_loss = tape.scale(
        tape.sum_all(tape.mul(edge_lp, tape.constant(x0.edge_probs))), -edge_weight / m);
    loss = tape.add(loss, edge_loss);
  }
  return loss;
}

inline GraphDistribution corrupt_graph(const MolecularGraph& g, int t, const NoiseSchedule& s,
                                       int kv, int ke, Rng& rng) {
  GraphDistribution d = GraphDistribution::zeros(g.n, kv, ke);
  for (int i = 0; i < g.n; ++i) {
    d.node_probs(i, forward_sample(g.nodes[i], t, s, FeatureSpace::node, rng)) = 1.0;
  }
  for (int p = 0; p < pair_count(g.n); ++p) {
    d.edge_probs(p, forward_sample(g.edges[p], t, s, FeatureSpace::edge, rng)) = 1.0;
  }
  return d;
}

/// Runs fn(chunk_index) for fixed-size chunks over [0, count) on up to
/// n_threads workers. Chunk boundaries are independent of the thread count,
/// so any reduction done per chunk and merged in chunk order is
/// deterministic regardless of parallelism.
template <typename Fn>
void parallel_chunks(int count, int chunk_size, int n_threads, Fn&& fn) {
  const int n_chunks = (count + chunk_size - 1) / chunk_size;
  if (n_threads <= 1 || n_chunks <= 1) {
    for (int c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int c = next.fetch_add(1);
      if (c >= n_chunks) break;
      fn(c);
    }
  };
  std::vector<std::thread> pool;
  const int spawn = std::min(n_threads, n_chunks);
  pool.reserve(spawn);
  for (int w = 0; w < spawn; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace detail

inline constexpr int kGradChunk = 8;

/// Trains the denoiser: per sample, draw a uniform step, corrupt the clean
/// graph through the forward chain, and minimize clean-graph cross-entropy.
/// Deterministic for a fixed seed at any thread count (fixed chunk layout,
/// in-order gradient reduction).
inline TrainLog train_denoiser(DenoiserModel& model, const std::vector<MolecularGraph>& dataset,
                               const NoiseSchedule& schedule, const DenoiserTrainOptions& opts) {
  require(!dataset.empty(), errc::empty_dataset, "train_denoiser: empty dataset");
  const DenoiserConfig& cfg = model.config();
  for (const auto& g : dataset) {
    for (int c : g.nodes) {
      require(c >= 0 && c < cfg.k_v, errc::vocabulary_violation,
              "train_denoiser: molecule outside vocabulary");
    }
  }

  Adam adam(model.params(), opts.lr);
  TrainLog log;
  std::vector<int> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(opts.seed, 0xe90c, epoch));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    int seen = 0;

    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const int count = static_cast<int>(std::min<std::size_t>(opts.batch_size,
                                                               order.size() - start));
      const int n_chunks = (count + kGradChunk - 1) / kGradChunk;
      std::vector<GradStore> chunk_grads(n_chunks, GradStore(model.params()));
      std::vector<double> chunk_loss(n_chunks, 0.0);

      detail::parallel_chunks(count, kGradChunk, opts.threads, [&](int c) {
        Tape tape;
        for (int k = c * kGradChunk; k < std::min(count, (c + 1) * kGradChunk); ++k) {
          const int idx = order[start + k];
          Rng rng(derive_seed(opts.seed, 0x7261 + epoch, idx));
          const int t = rng.uniform_int(schedule.T) + 1;
          const MolecularGraph& g0 = dataset[idx];
          const GraphDistribution gt =
              detail::corrupt_graph(g0, t, schedule, cfg.k_v, cfg.k_e, rng);
          const GraphDistribution x0 = GraphDistribution::one_hot(g0, cfg.k_v, cfg.k_e);
          tape.clear();
          auto fwd = model.forward(tape, gt, t, schedule);
          const int loss =
              detail::tape_ce_loss(tape, fwd.node_logits, fwd.edge_logits, x0,
                                   opts.edge_loss_weight);
          tape.backward(loss);
          fwd.tp.accumulate_into(chunk_grads[c]);
          chunk_loss[c] += tape.val(loss)(0, 0);
        }
      });

      GradStore total(model.params());
      for (int c = 0; c < n_chunks; ++c) {
        total.add(chunk_grads[c]);
        epoch_loss += chunk_loss[c];
      }
      seen += count;
      for (int s = 0; s < total.size(); ++s) total[s] /= count;
      adam.step(model.params(), total);
    }

    epoch_loss /= seen;
    require(std::isfinite(epoch_loss), errc::training_diverged,
            "train_denoiser: non-finite loss at epoch " + std::to_string(epoch));
    log.epoch_loss.push_back(epoch_loss);
  }
  return log;
}

}  // namespace moldiff
