#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fedgat/adam.hpp"
#include "fedgat/bigraph.hpp"
#include "fedgat/param_store.hpp"
#include "fedgat/tensor.hpp"

namespace fedgat {

enum class Pooling { Mean, Max, Root };

Pooling pooling_from_string(std::string_view text);
std::string_view pooling_to_string(Pooling pooling);

struct ModelConfig {
  std::size_t input_dim = 5000;  // vocabulary size
  std::size_t hidden_dim = 64;   // per-head output width
  std::size_t heads = 5;
  std::size_t classes = 4;
  double leaky_slope = 0.2;
  Pooling pooling = Pooling::Mean;
};

// One attention head: W maps d_in -> d_out, a scores a concatenated
// (center, neighbor) pair, shape (2*d_out) x 1.
struct GatHead {
  Tensor W;
  Tensor a;
};

// Both two-layer direction stacks plus the classifier head. Tensors share
// buffers with the ParamStore they were viewed from (and carry its tape
// binding, if any).
struct BiGatParams {
  std::vector<std::vector<GatHead>> td;  // [layer][head]
  std::vector<std::vector<GatHead>> bu;
  Tensor fc_w;  // (2*hidden) x classes
  Tensor fc_b;  // 1 x classes
};

struct Prediction {
  Tensor probs;  // 1 x classes, sums to 1
  int predicted_class = 0;
};

// Glorot-uniform weights and attention vectors, zero classifier bias.
// Parameter names follow td.l<layer>.h<head>.{W,a} / bu... / fc.{W,b}.
ParamStore init_bigat_params(const ModelConfig& cfg, std::uint64_t seed);

// Pure name/shape lookup into the store; throws on schema mismatch.
BiGatParams view_params(const ParamStore& store, const ModelConfig& cfg);

// Attention row for one node under one head: the node itself first, then the
// sources of its in-edges in edge-list order. Coefficients sum to 1.
struct AttentionRow {
  std::vector<std::size_t> neighbors;
  std::vector<double> alpha;
};
AttentionRow attention_coefficients(const GatHead& head, const Tensor& H,
                                    const EdgeList& edges, std::size_t node,
                                    double slope);

enum class MergeMode { Concat, Mean };

// One multi-head layer: per head, sigmoid of the attention-weighted sum over
// each in-neighborhood plus self; heads merged by concat or mean; ReLU after
// the merge.
Tensor gat_layer_forward(const std::vector<GatHead>& heads, MergeMode merge,
                         double slope, const Tensor& H, const EdgeList& edges);

Prediction bigat_forward(const BiGatParams& params, const ModelConfig& cfg,
                         const BiGraph& graph);

// Cross-entropy of the forward pass against graph.label plus the gradient for
// every parameter in the store.
struct LossAndGrads {
  double loss = 0.0;
  ParamStore grads;
};
LossAndGrads bigat_loss_gradients(const ParamStore& params,
                                  const ModelConfig& cfg, const BiGraph& graph);

struct TrainResult {
  ParamStore params;
  // Mean loss over the shard, measured after each epoch's updates.
  std::vector<double> epoch_losses;
};

// `epochs` seeded-shuffle passes over the shard with one optimizer step per
// batch. The shuffle for epoch e draws from derive_seed(shuffle_seed_base,
// {epoch_offset + e}), so a caller resuming at a later offset continues the
// same schedule.
TrainResult train_local(const ParamStore& params, const ModelConfig& cfg,
                        const std::vector<const BiGraph*>& graphs,
                        std::size_t epochs, AdamState& adam,
                        std::uint64_t shuffle_seed_base,
                        std::uint64_t epoch_offset, std::size_t batch_size = 1);

struct EvalResult {
  double mean_loss = 0.0;
  std::vector<Prediction> predictions;
};

// Forward-only, no tape; graphs are visited in the order given.
EvalResult evaluate(const ParamStore& params, const ModelConfig& cfg,
                    const std::vector<const BiGraph*>& graphs);

}  // namespace fedgat
