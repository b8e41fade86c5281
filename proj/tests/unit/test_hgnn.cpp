#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "cfmdd/errors.hpp"
#include "cfmdd/hgnn/graph.hpp"
#include "cfmdd/hgnn/model.hpp"
#include "cfmdd/hgnn/train.hpp"
#include "cfmdd/rng.hpp"
#include "helpers.hpp"

using namespace cfmdd;
using ad::Tensor;
using ad::Var;

namespace {

HgnnSample make_sample(const NetworkConfig& c, std::uint64_t seed) {
  const Instance inst = make_instance(c, seed);
  return {build_graph(inst.gains, inst.topology, c), SinrModel(inst.gains, inst.channels, c)};
}

HgnnConfig tiny_model(const NetworkConfig& c, std::size_t width = 8) {
  HgnnConfig h = HgnnConfig::for_network(c);
  h.F_ap_out = h.F_ms_out = h.hidden = width;
  return h;
}

// Trained-looking parameters: fitted scaler and non-trivial running stats.
ModelParams random_model(const HgnnConfig& h, const std::vector<const HetGraph*>& graphs,
                         std::uint64_t seed) {
  ModelParams p = init_params(h, seed);
  fit_feature_scaler(p, graphs, h);
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& name = p.names()[i];
    const bool stat = name.ends_with(".bn.mean") || name.ends_with(".bn.var");
    const bool affine = name.ends_with(".gamma") || name.ends_with(".beta") || name.ends_with(".b");
    if (!stat && !affine) continue;
    for (auto& v : p.tensor(i).values()) {
      v = name.ends_with(".var") || name.ends_with(".gamma") ? u(rng) : u(rng) - 1.0;
    }
  }
  return p;
}

// Eval-mode dense layer evaluated directly from the stored tensors.
std::vector<double> dense_ref(const ModelParams& p, const std::string& name,
                              const std::vector<double>& x, bool act_bn) {
  const Tensor& W = p.at(name + ".W");
  const Tensor& b = p.at(name + ".b");
  std::vector<double> y(W.rows());
  for (std::size_t o = 0; o < W.rows(); ++o) {
    double s = b[o];
    for (std::size_t i = 0; i < W.cols(); ++i) s += W(o, i) * x[i];
    if (act_bn) {
      s = s > 0.0 ? s : 0.01 * s;
      s = p.at(name + ".bn.gamma")[o] * (s - p.at(name + ".bn.mean")[o]) /
              std::sqrt(p.at(name + ".bn.var")[o] + 1e-5) +
          p.at(name + ".bn.beta")[o];
    }
    y[o] = s;
  }
  return y;
}

std::vector<const HetGraph*> ptrs(const std::vector<HgnnSample>& s) {
  std::vector<const HetGraph*> g;
  for (const auto& x : s) g.push_back(&x.graph);
  return g;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

}  // namespace

TEST_CASE("graph construction") {
  SUBCASE("feature lengths") {
    const NetworkConfig c = test::small_config(2, 1, 2, 1, 1);
    const auto s = make_sample(c, 1);
    for (const auto& f : s.graph.ap_features) CHECK(f.size() == 4);
    for (const auto& f : s.graph.ms_features) CHECK(f.size() == 5);
    const auto& f = s.graph.ap_features[1];
    CHECK(f[0] == s.graph.gains.w(1, 0, 0));
    CHECK(f[1] == c.P_l);
    CHECK(f[2] == c.xi_si_ap);
    CHECK(f[3] == c.xi_iai);
    const auto& g = s.graph.ms_features[0];
    CHECK(g[1] == s.graph.gains.v(1, 0, 0));
    CHECK(g[4] == c.xi_imi);
  }
  SUBCASE("distances") {
    NetworkConfig c = test::small_config(3, 2, 2, 2, 1);
    c.S_D = 0.0;
    const auto s = make_sample(c, 2);
    for (const double d : s.graph.dist_ap_ms) CHECK(d == 0.0);
    const auto t = make_sample(test::small_config(4, 3, 3, 2, 1), 3);
    for (std::size_t l = 0; l < 4; ++l) {
      CHECK(t.graph.ap_ap(l, l) == 0.0);
      for (std::size_t lp = 0; lp < 4; ++lp) {
        CHECK(t.graph.ap_ap(l, lp) == t.graph.ap_ap(lp, l));
        CHECK(t.graph.ap_ap(l, lp) >= 0.0);
      }
    }
    for (std::size_t d = 0; d < 3; ++d) CHECK(t.graph.ms_ms(d, d) == 0.0);
    CHECK(t.graph.ap_ms(2, 1) ==
          distance(t.graph.topology.ap_positions[2], t.graph.topology.ms_positions[1]));
  }
  SUBCASE("MS permutation moves features and gain blocks together") {
    const NetworkConfig c = test::small_config(3, 3, 3, 2, 1);
    const auto s = make_sample(c, 4);
    const std::vector<std::size_t> ap{0, 1, 2}, ms{2, 0, 1};
    const auto p = permute_graph(s.graph, ap, ms);
    for (std::size_t j = 0; j < 3; ++j) CHECK(p.ms_features[j] == s.graph.ms_features[ms[j]]);
    for (std::size_t l = 0; l < 3; ++l) {
      for (std::size_t m = 0; m < 2; ++m) {
        for (std::size_t j = 0; j < 3; ++j) {
          CHECK(p.ap_features[l][m * 3 + j] == s.graph.ap_features[l][m * 3 + ms[j]]);
        }
      }
    }
    CHECK(p.ms_ms(0, 1) == s.graph.ms_ms(2, 0));
    CHECK_THROWS_AS(permute_graph(s.graph, ap, {0, 0, 1}), InvalidInputError);
  }
}

TEST_CASE("adaptive embedding") {
  const NetworkConfig c = test::small_config(3, 2, 4, 2, 1);
  const auto s = make_sample(c, 5);
  HgnnConfig h = tiny_model(c);
  h.L_max = 6;
  ModelParams params = random_model(h, {&s.graph}, 1);
  auto embed = [&](const ModelParams& p, GraphBatch b) {
    ad::Tape tape;
    ParamBinder bind(tape, p, false);
    ForwardContext ctx{bind, b, h, false};
    Tensor a = adaptive_embed(ctx, NodeType::kAp).value();
    Tensor m = adaptive_embed(ctx, NodeType::kMs).value();
    return std::pair{a, m};
  };
  const GraphBatch batch = make_batch({&s.graph}, params, h);

  SUBCASE("zero features give the normalized zero vector") {
    GraphBatch zero = batch;
    zero.x_ap.fill(0.0);
    const Tensor y = embed(params, zero).first;
    for (std::size_t r = 0; r < y.rows(); ++r) {
      for (std::size_t j = 0; j < h.F_ap_out; ++j) {
        const double ref = params.at("ap.embed.bn.gamma")[j] * (0.0 - params.at("ap.embed.bn.mean")[j]) /
                               std::sqrt(params.at("ap.embed.bn.var")[j] + 1e-5) +
                           params.at("ap.embed.bn.beta")[j];
        CHECK(y(r, j) == doctest::Approx(ref).epsilon(1e-14));
      }
    }
  }
  SUBCASE("columns beyond the active slice are ignored") {
    const auto base = embed(params, batch);
    ModelParams q = params;
    Tensor& W = q.at("ap.embed.W");
    const std::size_t active = c.D * c.M + 3;
    CHECK(active < h.F_ap_max());
    for (std::size_t r = 0; r < W.rows(); ++r) {
      for (std::size_t j = active; j < W.cols(); ++j) W(r, j) += 7.0;
    }
    Tensor& Wm = q.at("ms.embed.W");
    for (std::size_t r = 0; r < Wm.rows(); ++r) {
      for (std::size_t j = c.L * c.Mbar + 3; j < Wm.cols(); ++j) Wm(r, j) -= 3.0;
    }
    const auto moved = embed(q, batch);
    CHECK(moved.first == base.first);
    CHECK(moved.second == base.second);
    CHECK(hgnn_forward(s.graph, q, h) == hgnn_forward(s.graph, params, h));
  }
  SUBCASE("D = N uses every column") {
    const NetworkConfig cf = test::small_config(3, 4, 4, 2, 1);
    const auto sf = make_sample(cf, 6);
    const HgnnConfig hf = tiny_model(cf);
    for (const auto& f : sf.graph.ap_features) CHECK(f.size() == hf.F_ap_max());
    ModelParams pf = random_model(hf, {&sf.graph}, 2);
    const GraphBatch bf = make_batch({&sf.graph}, pf, hf);
    const Tensor base = embed(pf, bf).first;
    ModelParams q = pf;
    Tensor& W = q.at("ap.embed.W");
    // last gain column, which belongs to the last slot
    for (std::size_t r = 0; r < W.rows(); ++r) W(r, hf.N * hf.M - 1) += 1.0;
    CHECK(max_abs_diff(embed(q, bf).first, base) > 1e-6);
  }
  SUBCASE("features beyond the model limit ask for clustering") {
    const NetworkConfig big = test::small_config(3, 5, 5, 2, 1);
    const auto sb = make_sample(big, 7);
    try {
      make_batch({&sb.graph}, params, h);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("clustering") != std::string::npos);
    }
  }
}

TEST_CASE("message passing") {
  const NetworkConfig c = test::small_config(4, 3, 3, 2, 1);
  const auto s = make_sample(c, 8);
  const HgnnConfig h = tiny_model(c);
  const ModelParams params = random_model(h, {&s.graph}, 3);
  const GraphBatch batch = make_batch({&s.graph}, params, h);
  Rng rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto rand_t = [&](std::size_t r, std::size_t k) {
    Tensor t(r, k);
    for (auto& v : t.values()) v = u(rng);
    return t;
  };
  const Tensor ap_emb = rand_t(4, h.F_ap_out), ms_emb = rand_t(3, h.F_ms_out);

  SUBCASE("zero neighbours") {
    ad::Tape tape;
    ParamBinder bind(tape, params, false);
    ForwardContext ctx{bind, batch, h, false};
    const Var z = message_pass(ctx, NodeType::kAp, MetaPath::kPhi1, 1, tape.constant(ap_emb),
                               tape.constant(Tensor(3, h.F_ms_out, 0.0)));
    const auto m0 = dense_ref(params, "ap.k1.phi1.xi1.1",
                              dense_ref(params, "ap.k1.phi1.xi1.0", std::vector<double>(h.F_ms_out, 0.0), true),
                              true);
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<double> v(ap_emb.data() + i * h.F_ap_out, ap_emb.data() + (i + 1) * h.F_ap_out);
      std::vector<double> cat = v;
      cat.insert(cat.end(), m0.begin(), m0.end());
      const auto out = dense_ref(params, "ap.k1.phi1.xi2.1", dense_ref(params, "ap.k1.phi1.xi2.0", cat, true), true);
      for (std::size_t j = 0; j < h.F_ap_out; ++j) {
        CHECK(z.value()(i, j) == doctest::Approx(out[j] + v[j]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("self-loops carry nothing through the interference path") {
    const Tensor agg = batch.ap_from_ap.multiply(ap_emb);
    for (std::size_t i = 0; i < 4; ++i) {
      Tensor moved = ap_emb;
      for (std::size_t j = 0; j < h.F_ap_out; ++j) moved(i, j) += 5.0;
      const Tensor agg2 = batch.ap_from_ap.multiply(moved);
      for (std::size_t j = 0; j < h.F_ap_out; ++j) CHECK(agg2(i, j) == agg(i, j));
    }
  }
  SUBCASE("neighbour order does not matter") {
    // relabel the MS rows and the matching operator columns
    const std::vector<std::size_t> perm{2, 0, 1};
    Tensor ms_perm(3, h.F_ms_out);
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < h.F_ms_out; ++k) ms_perm(j, k) = ms_emb(perm[j], k);
    }
    std::vector<std::size_t> inv(3);
    for (std::size_t j = 0; j < 3; ++j) inv[perm[j]] = j;
    GraphBatch pb = batch;
    std::vector<ad::SparseMatrix::Triplet> t;
    const auto& A = batch.ap_from_ms;
    for (std::size_t r = 0; r < A.rows; ++r) {
      for (std::size_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) t.push_back({r, inv[A.col[k]], A.val[k]});
    }
    pb.ap_from_ms = ad::SparseMatrix::from_triplets(A.rows, A.cols, t);
    auto run = [&](const GraphBatch& b, const Tensor& other) {
      ad::Tape tape;
      ParamBinder bind(tape, params, false);
      ForwardContext ctx{bind, b, h, false};
      return message_pass(ctx, NodeType::kAp, MetaPath::kPhi1, 0, tape.constant(ap_emb),
                          tape.constant(other))
          .value();
    };
    CHECK(max_abs_diff(run(batch, ms_emb), run(pb, ms_perm)) < 1e-12);
  }
}

TEST_CASE("meta-path attention") {
  const NetworkConfig c = test::small_config(4, 2, 2, 2, 1);
  std::vector<HgnnSample> data;
  for (std::uint64_t s = 1; s <= 3; ++s) data.push_back(make_sample(c, s));
  const HgnnConfig h = tiny_model(c);
  const ModelParams params = random_model(h, ptrs(data), 4);
  const GraphBatch batch = make_batch(ptrs(data), params, h);
  Rng rng(2);
  std::normal_distribution<double> n(0.0, 2.0);
  Tensor z1(12, h.F_ap_out), z2(12, h.F_ap_out);
  for (auto& v : z1.values()) v = n(rng);
  for (auto& v : z2.values()) v = n(rng);
  ad::Tape tape;
  ParamBinder bind(tape, params, false);
  ForwardContext ctx{bind, batch, h, false};

  Var beta;
  const Var same = metapath_attention(ctx, NodeType::kAp, 0, tape.constant(z1), tape.constant(z1), &beta);
  for (std::size_t g = 0; g < 3; ++g) {
    CHECK(beta.value()(g, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(beta.value()(g, 1) == doctest::Approx(0.5).epsilon(1e-15));
  }
  CHECK(max_abs_diff(same.value(), z1) < 1e-12);

  const Var mixed = metapath_attention(ctx, NodeType::kAp, 0, tape.constant(z1), tape.constant(z2), &beta);
  for (std::size_t g = 0; g < 3; ++g) {
    const double b1 = beta.value()(g, 0), b2 = beta.value()(g, 1);
    CHECK(b1 >= 0.0);
    CHECK(b2 >= 0.0);
    CHECK(b1 + b2 == doctest::Approx(1.0).epsilon(1e-15));
    // one weight pair per graph, shared by its nodes
    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t r = batch.entries[g].ap_offset + i;
      for (std::size_t j = 0; j < h.F_ap_out; ++j) {
        CHECK(mixed.value()(r, j) == doctest::Approx(b1 * z1(r, j) + b2 * z2(r, j)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("power heads") {
  const NetworkConfig c = test::small_config(4, 2, 3, 2, 1);
  std::vector<HgnnSample> data;
  for (std::uint64_t s = 1; s <= 4; ++s) data.push_back(make_sample(c, s));
  const HgnnConfig h = tiny_model(c);
  ModelParams params = random_model(h, ptrs(data), 5);
  const auto base = hgnn_forward(ptrs(data), params, h);
  for (const auto& p : base) CHECK(p.nonnegative());

  SUBCASE("rows beyond the active slots are ignored") {
    ModelParams q = params;
    Tensor& W = q.at("ap.head.2.W");
    Tensor& b = q.at("ap.head.2.b");
    for (std::size_t r = c.D * c.M; r < W.rows(); ++r) {
      for (std::size_t j = 0; j < W.cols(); ++j) W(r, j) = 100.0;
      b[r] = 100.0;
    }
    CHECK(hgnn_forward(ptrs(data), q, h) == base);
  }
  SUBCASE("constant head output gives the uniform budget share") {
    for (const std::size_t D : {2u, 3u}) {
      const NetworkConfig cf = test::small_config(4, D, 3, 2, 1);
      const auto sf = make_sample(cf, 9);
      const HgnnConfig hf = tiny_model(cf);
      ModelParams pf = random_model(hf, {&sf.graph}, 6);
      pf.at("ap.head.2.W").fill(0.0);
      pf.at("ap.head.2.b").fill(1.0);
      pf.at("ms.head.2.W").fill(0.0);
      pf.at("ms.head.2.b").fill(1.0);
      const auto p = hgnn_forward(sf.graph, pf, hf);
      for (const double v : p.p_dl) CHECK(v == doctest::Approx(cf.P_l / static_cast<double>(D * cf.M)));
      for (const double v : p.p_ul) CHECK(v == doctest::Approx(cf.P_d / static_cast<double>(cf.Mbar)));
    }
  }
  SUBCASE("negative pre-activations are clipped") {
    ModelParams q = params;
    q.at("ap.head.2.W").fill(0.0);
    q.at("ap.head.2.b").fill(-0.3);
    for (const auto& x : hgnn_forward(ptrs(data), q, h)) {
      for (const double v : x.p_dl) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("forward determinism and permutation equivariance") {
  const NetworkConfig c = test::small_config(5, 3, 4, 2, 2);
  const HgnnConfig h = HgnnConfig::for_network(c);
  std::vector<HgnnSample> data;
  for (std::uint64_t s = 1; s <= 6; ++s) data.push_back(make_sample(c, s));
  const ModelParams params = random_model(h, ptrs(data), 7);
  Rng rng(3);
  for (const auto& s : data) {
    const auto p = hgnn_forward(s.graph, params, h);
    CHECK(hgnn_forward(s.graph, params, h) == p);
    std::vector<std::size_t> ap(5), ms(3);
    std::iota(ap.begin(), ap.end(), 0);
    std::iota(ms.begin(), ms.end(), 0);
    std::shuffle(ap.begin(), ap.end(), rng);
    std::shuffle(ms.begin(), ms.end(), rng);
    const auto q = hgnn_forward(permute_graph(s.graph, ap, ms), params, h);
    double err = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t m = 0; m < 2; ++m) err = std::max(err, std::abs(q.dl(i, j, m) - p.dl(ap[i], ms[j], m)));
      }
    }
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t mb = 0; mb < 2; ++mb) err = std::max(err, std::abs(q.ul(j, mb) - p.ul(ms[j], mb)));
    }
    CHECK(err < 1e-5);
  }
}

TEST_CASE("penalty loss") {
  const NetworkConfig c = test::small_config(3, 2, 2, 2, 1);
  const Instance inst = make_instance(c, 3);
  const SinrModel model(inst.gains, inst.channels, c);
  const PenaltyWeights kappa{0.1, 1.0, 0.1, 0.1};
  const auto zero = PowerAllocation::zeros_like(c);
  CHECK(hgnn_loss(zero, inst.gains, inst.channels, c, kappa) ==
        doctest::Approx(0.1 * 0.5 * 2 + 1.0 * 0.1 * 2).epsilon(1e-14));

  // Large powers inside the budgets clear both thresholds here.
  PowerAllocation p = test::random_allocation(c, 11, 0.9);
  bool feasible = true;
  for (const auto& q : model.qos_margins(p, c.chi_dl, c.chi_ul)) feasible = feasible && q.dl >= 0 && q.ul >= 0;
  if (feasible) {
    CHECK(hgnn_loss(p, inst.gains, inst.channels, c, kappa) ==
          doctest::Approx(-model.spectral_efficiency(p)).epsilon(1e-14));
  }
  NetworkConfig lax = c;
  lax.chi_dl = lax.chi_ul = 0.0;
  CHECK(hgnn_loss(p, inst.gains, inst.channels, lax, kappa) ==
        doctest::Approx(-model.spectral_efficiency(p)).epsilon(1e-14));

  SUBCASE("over budget is charged linearly") {
    PowerAllocation q = p;
    for (auto& v : q.p_ul) v *= 3.0;  // each MS at 2.7 P_d
    double sum = 0.0;
    for (std::size_t d = 0; d < c.D; ++d) sum += q.ms_total(d) - c.P_d;
    const double base = SinrModel(inst.gains, inst.channels, lax).penalty_loss(q, lax, {0, 0, 0, 0});
    CHECK(model.penalty_loss(q, lax, {0, 0, 1.0, 0}) == doctest::Approx(base + sum).epsilon(1e-12));
  }

  SUBCASE("batched node equals the per-instance mean") {
    std::vector<HgnnSample> data;
    for (std::uint64_t s = 1; s <= 3; ++s) data.push_back(make_sample(c, s));
    const HgnnConfig h = tiny_model(c);
    const ModelParams params = random_model(h, ptrs(data), 8);
    const GraphBatch batch = make_batch(ptrs(data), params, h);
    ad::Tape tape;
    ParamBinder bind(tape, params, false);
    ForwardContext ctx{bind, batch, h, false};
    const ForwardOutput out = forward_batch(ctx);
    std::vector<const SinrModel*> models;
    for (const auto& s : data) models.push_back(&s.model);
    const PenaltyWeights none{0, 0, 0, 0};
    const Var l0 = penalty_loss_node(batch, models, c, none, out.p_ap, out.p_ms);
    const Var lk = penalty_loss_node(batch, models, c, kappa, out.p_ap, out.p_ms);
    double se = 0.0, pen = 0.0;
    for (std::size_t g = 0; g < data.size(); ++g) {
      const auto pa = batch_allocation(batch, g, out.p_ap.value(), out.p_ms.value());
      se += data[g].model.spectral_efficiency(pa);
      pen += data[g].model.penalty_loss(pa, c, kappa);
    }
    CHECK(l0.value().item() == doctest::Approx(-se / 3.0).epsilon(1e-13));
    CHECK(lk.value().item() == doctest::Approx(pen / 3.0).epsilon(1e-13));
    CHECK_THROWS_AS(penalty_loss_node(batch, {models[0]}, c, kappa, out.p_ap, out.p_ms),
                    InvalidInputError);
  }
}

TEST_CASE("end-to-end gradient matches finite differences") {
  const NetworkConfig c = test::small_config(2, 2, 2, 2, 1);
  std::vector<HgnnSample> data;
  for (std::uint64_t s = 1; s <= 2; ++s) data.push_back(make_sample(c, s));
  HgnnConfig h = tiny_model(c, 6);
  h.K = 1;
  const ModelParams params = random_model(h, ptrs(data), 9);
  std::vector<const SinrModel*> models;
  for (const auto& s : data) models.push_back(&s.model);

  for (const bool train : {false, true}) {
    CAPTURE(train);
    const auto loss_of = [&](const ModelParams& p, std::map<std::string, Tensor>* grads) {
      const GraphBatch batch = make_batch(ptrs(data), p, h);
      ad::Tape tape;
      ModelParams running = p;
      ParamBinder bind(tape, p, grads != nullptr, &running);
      ForwardContext ctx{bind, batch, h, train};
      const ForwardOutput out = forward_batch(ctx);
      const Var loss = penalty_loss_node(batch, models, c, h.kappa, out.p_ap, out.p_ms);
      if (grads != nullptr) {
        tape.backward(loss);
        for (const auto& [name, v] : bind.bound()) {
          if (v.requires_grad()) (*grads)[name] = v.grad().empty() ? Tensor::zeros_like(v.value()) : v.grad();
        }
      }
      return loss.value().item();
    };
    std::map<std::string, Tensor> grads;
    loss_of(params, &grads);
    double gmax = 0.0;
    for (const auto& [name, g] : grads) {
      for (const double v : g.values()) gmax = std::max(gmax, std::abs(v));
    }
    REQUIRE(gmax > 0.0);
    Rng rng(4);
    std::size_t checked = 0;
    double worst = 0.0;
    std::string worst_name;
    for (const auto& [name, g] : grads) {
      std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
      for (int rep = 0; rep < 3; ++rep) {
        const std::size_t i = pick(rng);
        ModelParams plus = params, minus = params;
        const double x = params.at(name)[i];
        const double step = 1e-6 * std::max(1.0, std::abs(x));
        plus.at(name)[i] = x + step;
        minus.at(name)[i] = x - step;
        const double fd = (loss_of(plus, nullptr) - loss_of(minus, nullptr)) / (2.0 * step);
        const double err = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-3 * gmax});
        if (err > worst) {
          worst = err;
          worst_name = name;
        }
        ++checked;
      }
    }
    CAPTURE(worst_name);
    CHECK(checked > 100);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("training") {
  const NetworkConfig c;
  std::vector<HgnnSample> one;
  one.push_back(make_sample(c, 1));
  HgnnConfig h = HgnnConfig::for_network(c);
  h.epochs = 200;

  SUBCASE("a single instance is fitted") {
    const TrainResult r = train(one, h, {.seed = 3, .on_epoch = {}});
    REQUIRE(r.epoch_loss.size() == 200);
    const double first = r.epoch_loss.front(), last = r.epoch_loss.back();
    CAPTURE(first);
    CAPTURE(last);
    CHECK(first - last >= 0.5 * std::abs(first));
  }
  SUBCASE("fixed seed reproduces the run") {
    h.epochs = 5;
    const NetworkConfig cs = test::small_config(3, 2, 2, 2, 1);
    h = tiny_model(cs);
    h.epochs = 5;
    std::vector<HgnnSample> data;
    for (std::uint64_t s = 1; s <= 6; ++s) data.push_back(make_sample(cs, s));
    h.batch_size = 4;
    std::vector<double> seen;
    TrainOptions opt;
    opt.seed = 7;
    opt.on_epoch = [&](std::size_t, double l) { seen.push_back(l); };
    const TrainResult a = train(data, h, opt);
    const TrainResult b = train(data, h, opt);
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(a.params == b.params);
    CHECK(seen.size() == 10);
    opt.seed = 8;
    CHECK_FALSE(train(data, h, opt).params == a.params);
    // running statistics moved away from their initial values
    CHECK_FALSE(a.params.at("ap.embed.bn.mean") == init_params(h, 7).at("ap.embed.bn.mean"));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(train({}, h), InvalidInputError);
    HgnnConfig bad = h;
    bad.lr = 0.0;
    CHECK_THROWS_AS(train(one, bad), ConfigError);
  }
}

TEST_CASE("evaluation metrics") {
  const NetworkConfig c = test::small_config(3, 2, 2, 2, 1);
  std::vector<HgnnSample> data;
  for (std::uint64_t s = 1; s <= 5; ++s) data.push_back(make_sample(c, s));
  const HgnnConfig h = tiny_model(c);
  const ModelParams params = random_model(h, ptrs(data), 10);

  const EvalMetrics m = evaluate(params, data, h);
  CHECK(m.ratio.empty());
  const EvalMetrics self = evaluate(params, data, h, &m.se);
  for (const double r : self.ratio) CHECK(r == 1.0);
  CHECK(self.mean_ratio == 1.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(m.allocations[i].within_budgets(c.P_l, c.P_d, 1e-12));
    CHECK(m.se[i] <= m.se_raw[i] + 1e-12);
  }
  const std::vector<double> short_ref(2, 1.0);
  CHECK_THROWS_AS(evaluate(params, data, h, &short_ref), InvalidInputError);

  ModelParams dead = params;
  for (std::size_t i = 0; i < dead.size(); ++i) {
    if (dead.trainable(i)) dead.tensor(i).fill(0.0);
  }
  const EvalMetrics z = evaluate(dead, data, h);
  CHECK(z.mean_se == 0.0);
  CHECK(z.qos_violation_rate == 1.0);
  CHECK(z.budget_violation_rate == 0.0);
}

TEST_CASE("budget projection") {
  const NetworkConfig c = test::small_config(2, 2, 2, 2, 2);
  PowerAllocation p = test::random_allocation(c, 1, 0.5);
  CHECK(project_to_budgets(p, c) == p);
  for (std::size_t i = 0; i < c.D * c.M; ++i) p.p_dl[i] *= 4.0;  // AP 0 at 2 P_l
  p.ul(1, 0) = 5.0;
  const PowerAllocation q = project_to_budgets(p, c);
  CHECK(q.ap_total(0) == doctest::Approx(c.P_l).epsilon(1e-14));
  CHECK(q.dl(0, 1, 1) == doctest::Approx(p.dl(0, 1, 1) / 2.0).epsilon(1e-14));
  CHECK(q.ms_total(1) == doctest::Approx(c.P_d).epsilon(1e-14));
  CHECK(q.ul(1, 1) / q.ul(1, 0) == doctest::Approx(p.ul(1, 1) / p.ul(1, 0)).epsilon(1e-12));
  for (std::size_t i = c.D * c.M; i < p.p_dl.size(); ++i) CHECK(q.p_dl[i] == p.p_dl[i]);
  CHECK(q.ul(0, 0) == p.ul(0, 0));
}

TEST_CASE("empirical CDF") {
  const auto cdf = empirical_cdf({3.0, 1.0, 2.0, 2.0, 5.0});
  REQUIRE(cdf.size() == 4);
  CHECK(cdf[0] == std::pair{1.0, 0.2});
  CHECK(cdf[1] == std::pair{2.0, 0.6});
  CHECK(cdf.back() == std::pair{5.0, 1.0});
  Rng rng(1);
  std::normal_distribution<double> n;
  std::vector<double> v(500);
  for (auto& x : v) x = n(rng);
  const auto big = empirical_cdf(v);
  for (std::size_t i = 1; i < big.size(); ++i) {
    CHECK(big[i].first > big[i - 1].first);
    CHECK(big[i].second > big[i - 1].second);
  }
  CHECK(big.back().second == 1.0);
  CHECK(empirical_cdf({}).empty());
}
