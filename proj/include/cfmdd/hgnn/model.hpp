#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cfmdd/ad/ops.hpp"
#include "cfmdd/ad/tape.hpp"
#include "cfmdd/hgnn/graph.hpp"
#include "cfmdd/sinr.hpp"

namespace cfmdd {

struct HgnnConfig {
  std::size_t N = 8, M = 4, Mbar = 2;
  std::size_t L_max = 24;  // largest AP count the MS features can hold
  std::size_t F_ap_out = 64, F_ms_out = 64;
  std::size_t hidden = 64;
  std::size_t K = 2;
  PenaltyWeights kappa{0.1, 1.0, 0.1, 0.1};
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  double leaky_slope = 0.01;

  std::size_t F_ap_max() const { return N * M + 3; }
  std::size_t F_ms_max() const { return L_max * Mbar + 3; }
  void validate() const;

  static HgnnConfig for_network(const NetworkConfig& c);
};

/// Named tensors of a model. Trainable entries get gradients; the rest are
/// batch-norm running statistics, feature scalers and shape metadata.
class ModelParams {
 public:
  void add(const std::string& name, ad::Tensor value, bool trainable);
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  ad::Tensor& at(const std::string& name);
  const ad::Tensor& at(const std::string& name) const;
  bool trainable(const std::string& name) const { return trainable_[index_.at(name)]; }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  ad::Tensor& tensor(std::size_t i) { return tensors_[i]; }
  const ad::Tensor& tensor(std::size_t i) const { return tensors_[i]; }
  bool trainable(std::size_t i) const { return trainable_[i]; }

  bool operator==(const ModelParams&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> tensors_;
  std::vector<bool> trainable_;
  std::map<std::string, std::size_t> index_;
};

/// He-uniform weights, zero biases, unit batch-norm scales, identity feature
/// scaler. Deterministic in `seed`.
ModelParams init_params(const HgnnConfig& config, std::uint64_t seed);

/// Shape metadata recorded in every model.
std::vector<double> config_dims(const HgnnConfig& config);
HgnnConfig config_from_dims(const ad::Tensor& dims);

/// Fits the per-dimension feature standardization (applied to log gains) on
/// the given graphs and stores it in `params`.
void fit_feature_scaler(ModelParams& params, const std::vector<const HetGraph*>& graphs,
                        const HgnnConfig& config);

/// Disjoint union of canonically ordered graphs, ready for the model.
struct GraphBatch {
  struct Entry {
    std::size_t ap_offset = 0, ms_offset = 0, L = 0, D = 0;
    CanonicalOrder order;                         // canonical -> original index
    std::vector<std::vector<std::size_t>> slots;  // canonical AP i: slot -> original MS
    std::size_t M = 0, Mbar = 0;
  };
  std::vector<Entry> entries;
  std::size_t num_ap = 0, num_ms = 0;
  ad::Tensor x_ap, x_ms;  // standardized features padded to F_max
  // Aggregation operators with entries d_ij / (S_D |N_i|).
  ad::SparseMatrix ap_from_ms, ap_from_ap, ms_from_ap, ms_from_ms;
  // Per-graph node averaging (G x n) and broadcast back (n x G).
  ad::SparseMatrix ap_pool, ms_pool, ap_spread, ms_spread;
  ad::Tensor ap_share, ms_share;  // n x 1 uniform budget share per output
};

GraphBatch make_batch(const std::vector<const HetGraph*>& graphs, const ModelParams& params,
                      const HgnnConfig& config);

/// Tape handles of the parameters used in one forward pass. Train-mode
/// batch-norm statistics are written to `running` when it is set.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, const ModelParams& params, bool grads,
              ModelParams* running = nullptr)
      : tape_(tape), params_(params), grads_(grads), running_(running) {}
  ad::Var get(const std::string& name);
  const ModelParams& params() const { return params_; }
  ModelParams* running() { return running_; }
  ad::Tape& tape() { return tape_; }
  const std::map<std::string, ad::Var>& bound() const { return vars_; }

 private:
  ad::Tape& tape_;
  const ModelParams& params_;
  bool grads_;
  ModelParams* running_;
  std::map<std::string, ad::Var> vars_;
};

enum class NodeType { kAp, kMs };
/// kPhi1: the other node type (MS-UL-AP for APs, AP-DL-MS for MSs);
/// kPhi2: same-type interference neighbors including the node itself.
enum class MetaPath { kPhi1, kPhi2 };

struct ForwardContext {
  ParamBinder& bind;
  const GraphBatch& batch;
  const HgnnConfig& config;
  bool train = false;
};

ad::Var adaptive_embed(ForwardContext& ctx, NodeType type);
ad::Var message_pass(ForwardContext& ctx, NodeType type, MetaPath path, std::size_t layer,
                     ad::Var self_emb, ad::Var other_emb);
/// Returns the fused representation; `beta` (G x 2) receives the meta-path
/// weights when non-null.
ad::Var metapath_attention(ForwardContext& ctx, NodeType type, std::size_t layer, ad::Var z1,
                           ad::Var z2, ad::Var* beta = nullptr);
/// Nonnegative powers: N*M columns per AP (slot-major, s * M + m) and Mbar
/// per MS, in watts.
ad::Var pa_heads(ForwardContext& ctx, NodeType type, ad::Var reps);

struct ForwardOutput {
  ad::Var p_ap, p_ms;
  std::vector<ad::Var> beta_ap, beta_ms;  // per layer
};
ForwardOutput forward_batch(ForwardContext& ctx);

/// Allocation of graph `g` of the batch in the original node labels.
PowerAllocation batch_allocation(const GraphBatch& batch, std::size_t g, const ad::Tensor& p_ap,
                                 const ad::Tensor& p_ms);

/// Batch-mean penalty loss as a differentiable node of p_ap, p_ms.
ad::Var penalty_loss_node(const GraphBatch& batch, const std::vector<const SinrModel*>& models,
                          const NetworkConfig& config, const PenaltyWeights& kappa, ad::Var p_ap,
                          ad::Var p_ms);

/// Eval-mode forward of one graph.
PowerAllocation hgnn_forward(const HetGraph& graph, const ModelParams& params,
                             const HgnnConfig& config);
std::vector<PowerAllocation> hgnn_forward(const std::vector<const HetGraph*>& graphs,
                                          const ModelParams& params, const HgnnConfig& config);

/// -SE plus the rectified QoS and budget penalties of one allocation.
double hgnn_loss(const PowerAllocation& pa, const EquivalentGains& gains,
                 const ChannelSet& channels, const NetworkConfig& config,
                 const PenaltyWeights& kappa);

}  // namespace cfmdd
