#include "cfmdd/hgnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfmdd/ad/adam.hpp"
#include "cfmdd/errors.hpp"
#include "cfmdd/rng.hpp"

namespace cfmdd {

namespace {

constexpr std::size_t kEvalChunk = 256;

std::vector<const HetGraph*> graph_ptrs(const std::vector<HgnnSample>& data) {
  std::vector<const HetGraph*> g;
  g.reserve(data.size());
  for (const auto& s : data) g.push_back(&s.graph);
  return g;
}

}  // namespace

TrainResult train(const std::vector<HgnnSample>& data, const HgnnConfig& config,
                  const TrainOptions& options) {
  if (data.empty()) throw InvalidInputError("training set is empty");
  ModelParams params = init_params(config, options.seed);
  fit_feature_scaler(params, graph_ptrs(data), config);
  return train_from(std::move(params), data, config, options);
}

TrainResult train_from(ModelParams params, const std::vector<HgnnSample>& data,
                       const HgnnConfig& config, const TrainOptions& options) {
  config.validate();
  if (data.empty()) throw InvalidInputError("training set is empty");
  const NetworkConfig& net = data.front().graph.config;
  TrainResult res;
  ad::AdamState adam;
  adam.lr = config.lr;
  std::vector<std::size_t> trainable;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.trainable(i)) trainable.push_back(i);
  }
  std::vector<std::size_t> order(data.size());
  const std::uint64_t shuffle_seed = derive_seed(options.seed, Stream::kShuffle);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(shuffle_seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const HetGraph*> graphs;
      std::vector<const SinrModel*> models;
      for (std::size_t i = start; i < end; ++i) {
        graphs.push_back(&data[order[i]].graph);
        models.push_back(&data[order[i]].model);
      }
      const GraphBatch batch = make_batch(graphs, params, config);
      ad::Tape tape;
      // Reads come from a snapshot so running-statistic updates do not alias.
      const ModelParams snapshot = params;
      ParamBinder bind(tape, snapshot, true, &params);
      ForwardContext ctx{bind, batch, config, true};
      const ForwardOutput out = forward_batch(ctx);
      ad::Var loss = penalty_loss_node(batch, models, net, config.kappa, out.p_ap, out.p_ms);
      if (!std::isfinite(loss.value().item())) throw NumericalError("training loss is not finite");
      tape.backward(loss);
      std::vector<ad::Tensor*> ps;
      std::vector<ad::Tensor> zero_grads;
      zero_grads.reserve(trainable.size());
      std::vector<const ad::Tensor*> gs;
      for (const auto i : trainable) {
        ps.push_back(&params.tensor(i));
        const auto it = bind.bound().find(params.names()[i]);
        if (it != bind.bound().end() && !it->second.grad().empty()) {
          gs.push_back(&it->second.grad());
        } else {
          zero_grads.push_back(ad::Tensor::zeros_like(params.tensor(i)));
          gs.push_back(&zero_grads.back());
        }
      }
      ad::adam_step(ps, gs, adam);
      epoch_sum += loss.value().item() * static_cast<double>(end - start);
    }
    const double mean = epoch_sum / static_cast<double>(data.size());
    if (!std::isfinite(mean)) throw NumericalError("training loss is not finite");
    res.epoch_loss.push_back(mean);
    if (options.on_epoch) options.on_epoch(epoch, mean);
  }
  res.params = std::move(params);
  return res;
}

PowerAllocation project_to_budgets(const PowerAllocation& pa, const NetworkConfig& config) {
  PowerAllocation out = pa;
  for (std::size_t l = 0; l < pa.L; ++l) {
    const double tot = pa.ap_total(l);
    if (tot > config.P_l && tot > 0.0) {
      const double s = config.P_l / tot;
      for (std::size_t i = 0; i < pa.D * pa.M; ++i) out.p_dl[l * pa.D * pa.M + i] *= s;
    }
  }
  for (std::size_t d = 0; d < pa.D; ++d) {
    const double tot = pa.ms_total(d);
    if (tot > config.P_d && tot > 0.0) {
      const double s = config.P_d / tot;
      for (std::size_t mb = 0; mb < pa.Mbar; ++mb) out.ul(d, mb) *= s;
    }
  }
  return out;
}

EvalMetrics evaluate(const ModelParams& params, const std::vector<HgnnSample>& data,
                     const HgnnConfig& config, const std::vector<double>* reference_se) {
  EvalMetrics m;
  if (reference_se != nullptr && reference_se->size() != data.size()) {
    throw InvalidInputError("reference SE list does not match the dataset");
  }
  const std::size_t n = data.size();
  m.se_raw.resize(n);
  m.se.resize(n);
  m.qos_violated.resize(n);
  m.budget_violated.resize(n);
  m.allocations.resize(n);
  for (std::size_t start = 0; start < n; start += kEvalChunk) {
    const std::size_t end = std::min(n, start + kEvalChunk);
    std::vector<const HetGraph*> graphs;
    for (std::size_t i = start; i < end; ++i) graphs.push_back(&data[i].graph);
    const auto pas = hgnn_forward(graphs, params, config);
    for (std::size_t i = start; i < end; ++i) {
      const auto& s = data[i];
      const auto& cfg = s.graph.config;
      const PowerAllocation& raw = pas[i - start];
      m.se_raw[i] = s.model.spectral_efficiency(raw);
      m.budget_violated[i] = !raw.within_budgets(cfg.P_l, cfg.P_d, 1e-9);
      PowerAllocation proj = project_to_budgets(raw, cfg);
      m.se[i] = s.model.spectral_efficiency(proj);
      bool viol = false;
      for (const auto& q : s.model.qos_margins(proj, cfg.chi_dl, cfg.chi_ul)) {
        viol = viol || q.dl < -1e-6 || q.ul < -1e-6;
      }
      m.qos_violated[i] = viol;
      m.allocations[i] = std::move(proj);
    }
  }
  if (n == 0) return m;
  const double dn = static_cast<double>(n);
  m.mean_se_raw = std::accumulate(m.se_raw.begin(), m.se_raw.end(), 0.0) / dn;
  m.mean_se = std::accumulate(m.se.begin(), m.se.end(), 0.0) / dn;
  m.qos_violation_rate =
      static_cast<double>(std::count(m.qos_violated.begin(), m.qos_violated.end(), true)) / dn;
  m.budget_violation_rate =
      static_cast<double>(std::count(m.budget_violated.begin(), m.budget_violated.end(), true)) /
      dn;
  if (reference_se != nullptr) {
    m.ratio.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double ref = (*reference_se)[i];
      m.ratio[i] = ref > 0.0 ? m.se[i] / ref : (m.se[i] == 0.0 ? 1.0 : 0.0);
    }
    m.mean_ratio = std::accumulate(m.ratio.begin(), m.ratio.end(), 0.0) / dn;
  }
  return m;
}

std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.emplace_back(values[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

}  // namespace cfmdd
