#include "cfmdd/hgnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cfmdd/errors.hpp"
#include "cfmdd/rng.hpp"

namespace cfmdd {

using ad::Tensor;
using ad::Var;

void HgnnConfig::validate() const {
  if (N == 0 || M == 0 || Mbar == 0 || L_max == 0) {
    throw ConfigError("HGNN network dimensions must be at least 1");
  }
  if (F_ap_out == 0 || F_ms_out == 0 || hidden == 0) throw ConfigError("HGNN widths must be >= 1");
  if (K == 0) throw ConfigError("HGNN needs at least one message-passing layer");
  for (const double k : kappa) {
    if (!(k >= 0.0)) throw ConfigError("penalty weights must be nonnegative");
  }
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(leaky_slope >= 0.0)) throw ConfigError("LeakyReLU slope must be nonnegative");
}

HgnnConfig HgnnConfig::for_network(const NetworkConfig& c) {
  HgnnConfig h;
  h.N = c.N;
  h.M = c.M;
  h.Mbar = c.Mbar;
  h.L_max = c.L;
  return h;
}

void ModelParams::add(const std::string& name, Tensor value, bool trainable) {
  if (has(name)) throw InvalidInputError("duplicate parameter " + name);
  index_[name] = names_.size();
  names_.push_back(name);
  tensors_.push_back(std::move(value));
  trainable_.push_back(trainable);
}

Tensor& ModelParams::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw InvalidInputError("unknown parameter " + name);
  return tensors_[it->second];
}

const Tensor& ModelParams::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw InvalidInputError("unknown parameter " + name);
  return tensors_[it->second];
}

namespace {

const char* prefix(NodeType t) { return t == NodeType::kAp ? "ap" : "ms"; }

std::string layer_prefix(NodeType t, std::size_t k) {
  return std::string(prefix(t)) + ".k" + std::to_string(k);
}

const char* path_name(MetaPath p) { return p == MetaPath::kPhi1 ? "phi1" : "phi2"; }

class Initializer {
 public:
  Initializer(ModelParams& p, std::uint64_t seed)
      : p_(p), rng_(derive_seed(seed, Stream::kModelInit)) {}

  void uniform(const std::string& name, std::size_t rows, std::size_t cols, double a) {
    std::uniform_real_distribution<double> u(-a, a);
    Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng_);
    p_.add(name, std::move(t), true);
  }
  void bn(const std::string& name, std::size_t width) {
    p_.add(name + ".gamma", Tensor(1, width, 1.0), true);
    p_.add(name + ".beta", Tensor(1, width, 0.0), true);
    p_.add(name + ".mean", Tensor(1, width, 0.0), false);
    p_.add(name + ".var", Tensor(1, width, 1.0), false);
  }
  void dense(const std::string& name, std::size_t in, std::size_t out, bool with_bn) {
    uniform(name + ".W", out, in, std::sqrt(6.0 / static_cast<double>(in)));
    p_.add(name + ".b", Tensor(1, out, 0.0), true);
    if (with_bn) bn(name + ".bn", out);
  }

 private:
  ModelParams& p_;
  Rng rng_;
};

Var bn_layer(ForwardContext& ctx, Var x, const std::string& name) {
  const auto& params = ctx.bind.params();
  ad::BatchNormStats stats{params.at(name + ".mean"), params.at(name + ".var")};
  Var y = ad::batch_norm(x, ctx.bind.get(name + ".gamma"), ctx.bind.get(name + ".beta"), stats,
                         ctx.train);
  if (ctx.train && ctx.bind.running() != nullptr) {
    ctx.bind.running()->at(name + ".mean") = stats.mean;
    ctx.bind.running()->at(name + ".var") = stats.var;
  }
  return y;
}

Var dense(ForwardContext& ctx, Var x, const std::string& name, bool act_bn) {
  Var y = ad::add(ad::matmul_nt(x, ctx.bind.get(name + ".W")), ctx.bind.get(name + ".b"));
  if (!act_bn) return y;
  y = ad::leaky_relu(y, ctx.config.leaky_slope);
  return bn_layer(ctx, y, name + ".bn");
}

double standardize(double x, double mean, double sd) {
  if (!(x > 0.0)) return 0.0;
  return (std::log(x) - mean) / sd;
}

}  // namespace

std::vector<double> config_dims(const HgnnConfig& c) {
  return {static_cast<double>(c.N),        static_cast<double>(c.M),
          static_cast<double>(c.Mbar),     static_cast<double>(c.L_max),
          static_cast<double>(c.F_ap_out), static_cast<double>(c.F_ms_out),
          static_cast<double>(c.hidden),   static_cast<double>(c.K)};
}

HgnnConfig config_from_dims(const Tensor& dims) {
  if (dims.size() != 8) throw ShapeError("model metadata has " + dims.shape_str() + " entries");
  HgnnConfig c;
  const auto at = [&](std::size_t i) { return static_cast<std::size_t>(dims[i]); };
  c.N = at(0);
  c.M = at(1);
  c.Mbar = at(2);
  c.L_max = at(3);
  c.F_ap_out = at(4);
  c.F_ms_out = at(5);
  c.hidden = at(6);
  c.K = at(7);
  return c;
}

ModelParams init_params(const HgnnConfig& c, std::uint64_t seed) {
  c.validate();
  ModelParams p;
  Initializer init(p, seed);
  const std::size_t H = c.hidden;
  for (const NodeType t : {NodeType::kAp, NodeType::kMs}) {
    const bool ap = t == NodeType::kAp;
    const std::size_t F = ap ? c.F_ap_out : c.F_ms_out;
    const std::size_t F_other = ap ? c.F_ms_out : c.F_ap_out;
    const std::size_t F_max = ap ? c.F_ap_max() : c.F_ms_max();
    const std::string tp = prefix(t);
    init.uniform(tp + ".embed.W", F, F_max, std::sqrt(6.0 / static_cast<double>(F_max)));
    init.bn(tp + ".embed.bn", F);
    for (std::size_t k = 0; k < c.K; ++k) {
      const std::string lp = layer_prefix(t, k);
      for (const MetaPath mp : {MetaPath::kPhi1, MetaPath::kPhi2}) {
        const std::string pp = lp + "." + path_name(mp);
        const std::size_t src = mp == MetaPath::kPhi1 ? F_other : F;
        init.dense(pp + ".xi1.0", src, H, true);
        init.dense(pp + ".xi1.1", H, H, true);
        init.dense(pp + ".xi2.0", F + H, H, true);
        init.dense(pp + ".xi2.1", H, F, true);
      }
      init.uniform(lp + ".att.W", H, F, std::sqrt(6.0 / static_cast<double>(F + H)));
      p.add(lp + ".att.b", Tensor(1, H, 0.0), true);
      init.uniform(lp + ".att.q", H, 1, std::sqrt(6.0 / static_cast<double>(H + 1)));
    }
    init.dense(tp + ".head.0", F, H, true);
    init.dense(tp + ".head.1", H, H, true);
    init.dense(tp + ".head.2", H, ap ? c.N * c.M : c.Mbar, false);
    p.add(tp + ".feat.mean", Tensor(1, F_max, 0.0), false);
    p.add(tp + ".feat.std", Tensor(1, F_max, 1.0), false);
  }
  p.add("meta.dims", Tensor::row(config_dims(c)), false);
  return p;
}

void fit_feature_scaler(ModelParams& params, const std::vector<const HetGraph*>& graphs,
                        const HgnnConfig& config) {
  for (const NodeType t : {NodeType::kAp, NodeType::kMs}) {
    const bool ap = t == NodeType::kAp;
    const std::size_t F = ap ? config.F_ap_max() : config.F_ms_max();
    std::vector<double> s(F, 0.0), s2(F, 0.0), n(F, 0.0);
    for (const auto* g : graphs) {
      const auto order = canonical_order(*g);
      const HetGraph cg = permute_graph(*g, order.ap, order.ms);
      for (const auto& f : ap ? cg.ap_features : cg.ms_features) {
        if (f.size() > F) continue;
        for (std::size_t j = 0; j < f.size(); ++j) {
          if (!(f[j] > 0.0)) continue;
          const double v = std::log(f[j]);
          s[j] += v;
          s2[j] += v * v;
          n[j] += 1.0;
        }
      }
    }
    Tensor& mean = params.at(std::string(prefix(t)) + ".feat.mean");
    Tensor& sd = params.at(std::string(prefix(t)) + ".feat.std");
    for (std::size_t j = 0; j < F; ++j) {
      if (n[j] == 0.0) {
        mean[j] = 0.0;
        sd[j] = 1.0;
        continue;
      }
      mean[j] = s[j] / n[j];
      const double var = std::max(0.0, s2[j] / n[j] - mean[j] * mean[j]);
      sd[j] = std::sqrt(var) > 1e-9 ? std::sqrt(var) : 1.0;
    }
  }
}

GraphBatch make_batch(const std::vector<const HetGraph*>& graphs, const ModelParams& params,
                      const HgnnConfig& config) {
  GraphBatch b;
  const std::size_t Fa = config.F_ap_max(), Fm = config.F_ms_max();
  std::vector<HetGraph> canon;
  canon.reserve(graphs.size());
  for (const auto* g : graphs) {
    if (g->gains.M != config.M || g->gains.Mbar != config.Mbar) {
      throw ConfigError("graph subcarrier counts do not match the model");
    }
    GraphBatch::Entry e;
    e.order = canonical_order(*g);
    canon.push_back(permute_graph(*g, e.order.ap, e.order.ms));
    const HetGraph& cg = canon.back();
    for (std::size_t i = 0; i < cg.L(); ++i) {
      if (cg.ap_features[i].size() > Fa) {
        throw ConfigError("AP feature length " + std::to_string(cg.ap_features[i].size()) +
                          " exceeds the model limit " + std::to_string(Fa) +
                          "; use clustering mode so that each AP serves at most N MSs");
      }
    }
    for (std::size_t j = 0; j < cg.D(); ++j) {
      if (cg.ms_features[j].size() > Fm) {
        throw ConfigError("MS feature length " + std::to_string(cg.ms_features[j].size()) +
                          " exceeds the model limit " + std::to_string(Fm) +
                          "; use clustering mode to bound the serving APs per MS");
      }
    }
    e.L = cg.L();
    e.D = cg.D();
    e.M = cg.gains.M;
    e.Mbar = cg.gains.Mbar;
    e.ap_offset = b.num_ap;
    e.ms_offset = b.num_ms;
    e.slots.resize(e.L);
    for (std::size_t i = 0; i < e.L; ++i) {
      for (const auto s : cg.ap_slots[i]) e.slots[i].push_back(e.order.ms[s]);
    }
    b.num_ap += e.L;
    b.num_ms += e.D;
    b.entries.push_back(std::move(e));
  }
  const std::size_t G = graphs.size();
  b.x_ap = Tensor(b.num_ap, Fa, 0.0);
  b.x_ms = Tensor(b.num_ms, Fm, 0.0);
  b.ap_share = Tensor(b.num_ap, 1, 0.0);
  b.ms_share = Tensor(b.num_ms, 1, 0.0);
  const Tensor& am = params.at("ap.feat.mean");
  const Tensor& as = params.at("ap.feat.std");
  const Tensor& mm = params.at("ms.feat.mean");
  const Tensor& ms = params.at("ms.feat.std");
  if (am.size() != Fa || mm.size() != Fm) throw ShapeError("feature scaler does not match config");

  using T = ad::SparseMatrix::Triplet;
  std::vector<T> t_am, t_aa, t_ma, t_mm, t_apool, t_mpool, t_aspread, t_mspread;
  for (std::size_t gi = 0; gi < G; ++gi) {
    const auto& e = b.entries[gi];
    const HetGraph& cg = canon[gi];
    const auto& c = cg.config;
    const double inv_sd = c.S_D > 0.0 ? 1.0 / c.S_D : 0.0;
    for (std::size_t i = 0; i < e.L; ++i) {
      const std::size_t r = e.ap_offset + i;
      const auto& f = cg.ap_features[i];
      for (std::size_t j = 0; j < f.size(); ++j) b.x_ap(r, j) = standardize(f[j], am[j], as[j]);
      const auto& nb = cg.ap_slots[i];
      for (const auto d : nb) {
        t_am.push_back({r, e.ms_offset + d,
                        cg.ap_ms(i, d) * inv_sd / static_cast<double>(nb.size())});
      }
      for (std::size_t lp = 0; lp < e.L; ++lp) {
        t_aa.push_back({r, e.ap_offset + lp, cg.ap_ap(i, lp) * inv_sd / static_cast<double>(e.L)});
      }
      t_apool.push_back({gi, r, 1.0 / static_cast<double>(e.L)});
      t_aspread.push_back({r, gi, 1.0});
      b.ap_share(r, 0) = nb.empty() ? 0.0 : c.P_l / static_cast<double>(nb.size() * e.M);
    }
    for (std::size_t j = 0; j < e.D; ++j) {
      const std::size_t r = e.ms_offset + j;
      const auto& f = cg.ms_features[j];
      for (std::size_t q = 0; q < f.size(); ++q) b.x_ms(r, q) = standardize(f[q], mm[q], ms[q]);
      const auto& nb = cg.ms_slots[j];
      for (const auto l : nb) {
        t_ma.push_back({r, e.ap_offset + l,
                        cg.ap_ms(l, j) * inv_sd / static_cast<double>(nb.size())});
      }
      for (std::size_t dp = 0; dp < e.D; ++dp) {
        t_mm.push_back({r, e.ms_offset + dp, cg.ms_ms(j, dp) * inv_sd / static_cast<double>(e.D)});
      }
      t_mpool.push_back({gi, r, 1.0 / static_cast<double>(e.D)});
      t_mspread.push_back({r, gi, 1.0});
      b.ms_share(r, 0) = c.P_d / static_cast<double>(e.Mbar);
    }
  }
  using S = ad::SparseMatrix;
  b.ap_from_ms = S::from_triplets(b.num_ap, b.num_ms, std::move(t_am));
  b.ap_from_ap = S::from_triplets(b.num_ap, b.num_ap, std::move(t_aa));
  b.ms_from_ap = S::from_triplets(b.num_ms, b.num_ap, std::move(t_ma));
  b.ms_from_ms = S::from_triplets(b.num_ms, b.num_ms, std::move(t_mm));
  b.ap_pool = S::from_triplets(G, b.num_ap, std::move(t_apool));
  b.ms_pool = S::from_triplets(G, b.num_ms, std::move(t_mpool));
  b.ap_spread = S::from_triplets(b.num_ap, G, std::move(t_aspread));
  b.ms_spread = S::from_triplets(b.num_ms, G, std::move(t_mspread));
  return b;
}

Var ParamBinder::get(const std::string& name) {
  const auto it = vars_.find(name);
  if (it != vars_.end()) return it->second;
  const Var v = tape_.leaf(params_.at(name), grads_ && params_.trainable(name));
  vars_.emplace(name, v);
  return v;
}

Var adaptive_embed(ForwardContext& ctx, NodeType type) {
  const bool ap = type == NodeType::kAp;
  Var x = ctx.bind.tape().constant(ap ? ctx.batch.x_ap : ctx.batch.x_ms);
  const std::string tp = prefix(type);
  Var y = ad::matmul_nt(x, ctx.bind.get(tp + ".embed.W"));
  return bn_layer(ctx, y, tp + ".embed.bn");
}

Var message_pass(ForwardContext& ctx, NodeType type, MetaPath path, std::size_t layer,
                 Var self_emb, Var other_emb) {
  const bool ap = type == NodeType::kAp;
  const bool phi1 = path == MetaPath::kPhi1;
  const ad::SparseMatrix& A = ap ? (phi1 ? ctx.batch.ap_from_ms : ctx.batch.ap_from_ap)
                                 : (phi1 ? ctx.batch.ms_from_ap : ctx.batch.ms_from_ms);
  const std::string pp = layer_prefix(type, layer) + "." + path_name(path);
  Var agg = ad::spmm(A, phi1 ? other_emb : self_emb);
  Var m = dense(ctx, dense(ctx, agg, pp + ".xi1.0", true), pp + ".xi1.1", true);
  Var h = dense(ctx, ad::concat_cols(self_emb, m), pp + ".xi2.0", true);
  h = dense(ctx, h, pp + ".xi2.1", true);
  return ad::add(h, self_emb);
}

Var metapath_attention(ForwardContext& ctx, NodeType type, std::size_t layer, Var z1, Var z2,
                       Var* beta) {
  const bool ap = type == NodeType::kAp;
  const std::string lp = layer_prefix(type, layer);
  const auto& pool = ap ? ctx.batch.ap_pool : ctx.batch.ms_pool;
  const auto& spread = ap ? ctx.batch.ap_spread : ctx.batch.ms_spread;
  const auto score = [&](Var z) {
    Var s = ad::add(ad::matmul_nt(z, ctx.bind.get(lp + ".att.W")), ctx.bind.get(lp + ".att.b"));
    return ad::spmm(pool, ad::matmul(s, ctx.bind.get(lp + ".att.q")));
  };
  Var b = ad::softmax_rows(ad::concat_cols(score(z1), score(z2)));
  if (beta != nullptr) *beta = b;
  Var per_node = ad::spmm(spread, b);
  return ad::add(ad::mul(z1, ad::slice_cols(per_node, 0, 1)),
                 ad::mul(z2, ad::slice_cols(per_node, 1, 2)));
}

Var pa_heads(ForwardContext& ctx, NodeType type, Var reps) {
  const bool ap = type == NodeType::kAp;
  const std::string tp = prefix(type);
  Var h = dense(ctx, reps, tp + ".head.0", true);
  h = dense(ctx, h, tp + ".head.1", true);
  Var y = ad::relu(dense(ctx, h, tp + ".head.2", false));
  return ad::mul(y, ctx.bind.tape().constant(ap ? ctx.batch.ap_share : ctx.batch.ms_share));
}

ForwardOutput forward_batch(ForwardContext& ctx) {
  ForwardOutput out;
  Var ap = adaptive_embed(ctx, NodeType::kAp);
  Var ms = adaptive_embed(ctx, NodeType::kMs);
  for (std::size_t k = 0; k < ctx.config.K; ++k) {
    Var a1 = message_pass(ctx, NodeType::kAp, MetaPath::kPhi1, k, ap, ms);
    Var a2 = message_pass(ctx, NodeType::kAp, MetaPath::kPhi2, k, ap, ms);
    Var m1 = message_pass(ctx, NodeType::kMs, MetaPath::kPhi1, k, ms, ap);
    Var m2 = message_pass(ctx, NodeType::kMs, MetaPath::kPhi2, k, ms, ap);
    Var ba, bm;
    ap = metapath_attention(ctx, NodeType::kAp, k, a1, a2, &ba);
    ms = metapath_attention(ctx, NodeType::kMs, k, m1, m2, &bm);
    out.beta_ap.push_back(ba);
    out.beta_ms.push_back(bm);
  }
  out.p_ap = pa_heads(ctx, NodeType::kAp, ap);
  out.p_ms = pa_heads(ctx, NodeType::kMs, ms);
  return out;
}

PowerAllocation batch_allocation(const GraphBatch& batch, std::size_t g, const Tensor& p_ap,
                                 const Tensor& p_ms) {
  const auto& e = batch.entries.at(g);
  PowerAllocation pa(e.L, e.D, e.M, e.Mbar);
  for (std::size_t i = 0; i < e.L; ++i) {
    const std::size_t l = e.order.ap[i];
    for (std::size_t s = 0; s < e.slots[i].size(); ++s) {
      const std::size_t d = e.slots[i][s];
      for (std::size_t m = 0; m < e.M; ++m) pa.dl(l, d, m) = p_ap(e.ap_offset + i, s * e.M + m);
    }
  }
  for (std::size_t j = 0; j < e.D; ++j) {
    const std::size_t d = e.order.ms[j];
    for (std::size_t mb = 0; mb < e.Mbar; ++mb) pa.ul(d, mb) = p_ms(e.ms_offset + j, mb);
  }
  return pa;
}

Var penalty_loss_node(const GraphBatch& batch, const std::vector<const SinrModel*>& models,
                      const NetworkConfig& config, const PenaltyWeights& kappa, Var p_ap,
                      Var p_ms) {
  const std::size_t G = batch.entries.size();
  if (models.size() != G) throw InvalidInputError("one SINR model per graph is required");
  std::vector<double> loss(G, 0.0);
  std::vector<PowerAllocation> grads(G);
  const Tensor& pa_v = p_ap.value();
  const Tensor& pm_v = p_ms.value();
  const long long n = static_cast<long long>(G);
#pragma omp parallel for schedule(dynamic)
  for (long long gi = 0; gi < n; ++gi) {
    const auto g = static_cast<std::size_t>(gi);
    const PowerAllocation pa = batch_allocation(batch, g, pa_v, pm_v);
    loss[g] = models[g]->penalty_loss(pa, config, kappa, &grads[g]);
  }
  double total = 0.0;
  for (const double v : loss) total += v;
  const double inv_g = 1.0 / static_cast<double>(G);
  return ad::custom(
      {p_ap, p_ms}, Tensor::scalar(total * inv_g),
      [&batch, grads = std::move(grads), p_ap, p_ms, inv_g](ad::Tape& t, const Tensor& g) {
        Tensor ga = Tensor::zeros_like(t.value(p_ap.id));
        Tensor gm = Tensor::zeros_like(t.value(p_ms.id));
        const double s = g[0] * inv_g;
        for (std::size_t gi = 0; gi < batch.entries.size(); ++gi) {
          const auto& e = batch.entries[gi];
          const auto& gr = grads[gi];
          for (std::size_t i = 0; i < e.L; ++i) {
            const std::size_t l = e.order.ap[i];
            for (std::size_t sl = 0; sl < e.slots[i].size(); ++sl) {
              const std::size_t d = e.slots[i][sl];
              for (std::size_t m = 0; m < e.M; ++m) {
                ga(e.ap_offset + i, sl * e.M + m) = s * gr.dl(l, d, m);
              }
            }
          }
          for (std::size_t j = 0; j < e.D; ++j) {
            const std::size_t d = e.order.ms[j];
            for (std::size_t mb = 0; mb < e.Mbar; ++mb) gm(e.ms_offset + j, mb) = s * gr.ul(d, mb);
          }
        }
        t.accumulate(p_ap, ga);
        t.accumulate(p_ms, gm);
      },
      "penalty_loss");
}

std::vector<PowerAllocation> hgnn_forward(const std::vector<const HetGraph*>& graphs,
                                          const ModelParams& params, const HgnnConfig& config) {
  if (graphs.empty()) return {};
  const GraphBatch batch = make_batch(graphs, params, config);
  ad::Tape tape;
  ParamBinder bind(tape, params, false);
  ForwardContext ctx{bind, batch, config, false};
  const ForwardOutput out = forward_batch(ctx);
  std::vector<PowerAllocation> res;
  res.reserve(graphs.size());
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    res.push_back(batch_allocation(batch, g, out.p_ap.value(), out.p_ms.value()));
  }
  return res;
}

PowerAllocation hgnn_forward(const HetGraph& graph, const ModelParams& params,
                             const HgnnConfig& config) {
  return hgnn_forward(std::vector<const HetGraph*>{&graph}, params, config).front();
}

double hgnn_loss(const PowerAllocation& pa, const EquivalentGains& gains,
                 const ChannelSet& channels, const NetworkConfig& config,
                 const PenaltyWeights& kappa) {
  return SinrModel(gains, channels, config).penalty_loss(pa, config, kappa);
}

}  // namespace cfmdd
