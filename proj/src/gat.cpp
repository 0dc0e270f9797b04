#include "fedgat/gat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedgat/errors.hpp"
#include "fedgat/rng.hpp"

namespace fedgat {

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out,
              std::vector<std::size_t> shape, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> vals(n);
  for (auto& v : vals) v = rng.uniform(-limit, limit);
  return Tensor(std::move(shape), std::move(vals));
}

std::string param_name(const char* dir, std::size_t layer, std::size_t head,
                       const char* field) {
  return std::string(dir) + ".l" + std::to_string(layer) + ".h" +
         std::to_string(head) + "." + field;
}

// In-neighborhood of every node: the node itself first, then the sources of
// edges pointing at it, in edge-list order.
std::vector<std::vector<std::size_t>> in_neighborhoods(std::size_t n,
                                                       const EdgeList& edges) {
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t i = 0; i < n; ++i) nbrs[i].push_back(i);
  for (const auto& [src, dst] : edges) nbrs[dst].push_back(src);
  return nbrs;
}

struct HeadContext {
  Tensor Hw;  // n x d, transformed features
  Tensor s;   // n x 1, center scores
  Tensor t;   // n x 1, neighbor scores
};

// Splits the attention vector: the logit for (center i, neighbor j) is
// s_i + t_j with s = Hw a_first, t = Hw a_second.
HeadContext head_context(const GatHead& head, const Tensor& H) {
  const std::size_t d = head.W.cols();
  HeadContext ctx;
  ctx.Hw = matmul(H, head.W);
  std::vector<std::size_t> first(d), second(d);
  std::iota(first.begin(), first.end(), 0);
  std::iota(second.begin(), second.end(), d);
  ctx.s = matmul(ctx.Hw, gather_rows(head.a, std::move(first)));
  ctx.t = matmul(ctx.Hw, gather_rows(head.a, std::move(second)));
  return ctx;
}

Tensor alpha_row(const HeadContext& ctx, const std::vector<std::size_t>& nbrs,
                 std::size_t node, double slope) {
  const std::size_t len = nbrs.size();
  Tensor si = gather_rows(ctx.s, std::vector<std::size_t>(len, node));
  Tensor tj = gather_rows(ctx.t, nbrs);
  Tensor logits = reshape(leaky_relu(add(si, tj), slope), {1, len});
  return softmax_rows(logits);
}

Tensor head_forward(const GatHead& head, const Tensor& H,
                    const std::vector<std::vector<std::size_t>>& nbrs,
                    double slope) {
  const HeadContext ctx = head_context(head, H);
  std::vector<Tensor> rows;
  rows.reserve(nbrs.size());
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    Tensor alpha = alpha_row(ctx, nbrs[i], i, slope);
    rows.push_back(matmul(alpha, gather_rows(ctx.Hw, nbrs[i])));
  }
  return sigmoid(concat(rows, 0));
}

Tensor direction_forward(const std::vector<std::vector<GatHead>>& layers,
                         const Tensor& features, const EdgeList& edges,
                         const ModelConfig& cfg) {
  Tensor H = features;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const MergeMode merge =
        li + 1 == layers.size() ? MergeMode::Mean : MergeMode::Concat;
    H = gat_layer_forward(layers[li], merge, cfg.leaky_slope, H, edges);
  }
  return H;
}

Tensor pool_nodes(const Tensor& H, Pooling pooling, std::size_t root) {
  switch (pooling) {
    case Pooling::Mean: return mean_rows(H);
    case Pooling::Max: return max_rows(H);
    case Pooling::Root: return gather_rows(H, {root});
  }
  throw std::logic_error("unreachable pooling value");
}

}  // namespace

Pooling pooling_from_string(std::string_view text) {
  if (text == "mean") return Pooling::Mean;
  if (text == "max") return Pooling::Max;
  if (text == "root-node" || text == "root") return Pooling::Root;
  throw ConfigError("unknown pooling \"" + std::string(text) +
                    "\" (expected mean, max, or root-node)");
}

std::string_view pooling_to_string(Pooling pooling) {
  switch (pooling) {
    case Pooling::Mean: return "mean";
    case Pooling::Max: return "max";
    case Pooling::Root: return "root-node";
  }
  throw std::logic_error("unreachable pooling value");
}

ParamStore init_bigat_params(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.input_dim < 1 || cfg.hidden_dim < 1 || cfg.heads < 1 ||
      cfg.classes < 2) {
    throw ConfigError("model dimensions must be positive");
  }
  if (cfg.leaky_slope < 0.0 || cfg.leaky_slope >= 1.0) {
    throw ConfigError("leaky slope must lie in [0, 1)");
  }
  Rng rng(seed);
  ParamStore store;
  for (const char* dir : {"td", "bu"}) {
    for (std::size_t layer = 0; layer < 2; ++layer) {
      const std::size_t d_in =
          layer == 0 ? cfg.input_dim : cfg.heads * cfg.hidden_dim;
      const std::size_t d_out = cfg.hidden_dim;
      for (std::size_t h = 0; h < cfg.heads; ++h) {
        store.add(param_name(dir, layer, h, "W"),
                  glorot(d_in, d_out, {d_in, d_out}, rng));
        store.add(param_name(dir, layer, h, "a"),
                  glorot(2 * d_out, 1, {2 * d_out, 1}, rng));
      }
    }
  }
  store.add("fc.W",
            glorot(2 * cfg.hidden_dim, cfg.classes,
                   {2 * cfg.hidden_dim, cfg.classes}, rng));
  store.add("fc.b", Tensor::zeros({1, cfg.classes}));
  return store;
}

BiGatParams view_params(const ParamStore& store, const ModelConfig& cfg) {
  auto expect = [&](const std::string& name,
                    const std::vector<std::size_t>& shape) -> const Tensor& {
    if (!store.contains(name)) {
      throw std::invalid_argument("parameter store is missing " + name);
    }
    const Tensor& t = store.at(name);
    if (t.shape() != shape) {
      throw std::invalid_argument("parameter " + name + " has shape " +
                                  t.shape_str() + ", model expects another");
    }
    return t;
  };

  BiGatParams params;
  for (auto* stack : {&params.td, &params.bu}) {
    const char* dir = stack == &params.td ? "td" : "bu";
    stack->resize(2);
    for (std::size_t layer = 0; layer < 2; ++layer) {
      const std::size_t d_in =
          layer == 0 ? cfg.input_dim : cfg.heads * cfg.hidden_dim;
      for (std::size_t h = 0; h < cfg.heads; ++h) {
        GatHead head;
        head.W = expect(param_name(dir, layer, h, "W"), {d_in, cfg.hidden_dim});
        head.a =
            expect(param_name(dir, layer, h, "a"), {2 * cfg.hidden_dim, 1});
        (*stack)[layer].push_back(std::move(head));
      }
    }
  }
  params.fc_w = expect("fc.W", {2 * cfg.hidden_dim, cfg.classes});
  params.fc_b = expect("fc.b", {1, cfg.classes});
  return params;
}

AttentionRow attention_coefficients(const GatHead& head, const Tensor& H,
                                    const EdgeList& edges, std::size_t node,
                                    double slope) {
  if (node >= H.rows()) {
    throw std::invalid_argument("attention node index out of range");
  }
  AttentionRow row;
  row.neighbors.push_back(node);
  for (const auto& [src, dst] : edges) {
    if (dst == node) row.neighbors.push_back(src);
  }
  const HeadContext ctx = head_context(head, H);
  row.alpha = alpha_row(ctx, row.neighbors, node, slope).values();
  return row;
}

Tensor gat_layer_forward(const std::vector<GatHead>& heads, MergeMode merge,
                         double slope, const Tensor& H, const EdgeList& edges) {
  if (heads.empty()) throw std::invalid_argument("layer needs at least one head");
  const auto nbrs = in_neighborhoods(H.rows(), edges);
  std::vector<Tensor> outs;
  outs.reserve(heads.size());
  for (const GatHead& head : heads) {
    outs.push_back(head_forward(head, H, nbrs, slope));
  }
  Tensor merged;
  if (merge == MergeMode::Concat) {
    merged = concat(outs, 1);
  } else {
    Tensor acc = outs[0];
    for (std::size_t k = 1; k < outs.size(); ++k) acc = add(acc, outs[k]);
    merged = scale(acc, 1.0 / static_cast<double>(outs.size()));
  }
  return relu(merged);
}

Prediction bigat_forward(const BiGatParams& params, const ModelConfig& cfg,
                         const BiGraph& graph) {
  const Tensor td = pool_nodes(
      direction_forward(params.td, graph.features, graph.td_edges, cfg),
      cfg.pooling, graph.root);
  const Tensor bu = pool_nodes(
      direction_forward(params.bu, graph.features, graph.bu_edges, cfg),
      cfg.pooling, graph.root);
  const Tensor z = add(matmul(concat(std::vector<Tensor>{td, bu}, 1),
                              params.fc_w),
                       params.fc_b);
  Prediction pred;
  pred.probs = softmax_rows(z);
  const auto& p = pred.probs.values();
  pred.predicted_class = static_cast<int>(
      std::max_element(p.begin(), p.end()) - p.begin());
  return pred;
}

LossAndGrads bigat_loss_gradients(const ParamStore& params,
                                  const ModelConfig& cfg,
                                  const BiGraph& graph) {
  GradTape tape;
  const ParamStore bound = params.bound_to(tape);
  const BiGatParams view = view_params(bound, cfg);
  const Prediction pred = bigat_forward(view, cfg, graph);
  const Tensor loss = cross_entropy(pred.probs, graph.label);
  tape.backward(loss);

  LossAndGrads out;
  out.loss = loss.at(0);
  for (const auto& [name, t] : bound.items()) {
    out.grads.add(name, tape.grad(t));
  }
  return out;
}

TrainResult train_local(const ParamStore& params, const ModelConfig& cfg,
                        const std::vector<const BiGraph*>& graphs,
                        std::size_t epochs, AdamState& adam,
                        std::uint64_t shuffle_seed_base,
                        std::uint64_t epoch_offset, std::size_t batch_size) {
  if (graphs.empty()) {
    throw std::invalid_argument("cannot train on an empty shard");
  }
  if (epochs < 1) throw std::invalid_argument("need at least one epoch");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");

  TrainResult result;
  result.params = params;

  for (std::size_t e = 0; e < epochs; ++e) {
    // Each epoch shuffles a fresh identity order, so the visit sequence for
    // a given (base, offset + e) never depends on earlier epochs.
    std::vector<std::size_t> order(graphs.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(shuffle_seed_base, {epoch_offset + e}));
    rng.shuffle(order);

    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      std::vector<double> acc(result.params.value_count(), 0.0);
      for (std::size_t i = start; i < stop; ++i) {
        const auto lg =
            bigat_loss_gradients(result.params, cfg, *graphs[order[i]]);
        const auto flat = lg.grads.flatten();
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += flat[j];
      }
      if (stop - start > 1) {
        const double inv = 1.0 / static_cast<double>(stop - start);
        for (double& g : acc) g *= inv;
      }
      ParamStore grads = result.params;
      grads.unflatten(acc);
      result.params = adam_step(result.params, grads, adam);
    }

    // Shard loss at end-of-epoch parameters, visited in this epoch's order.
    std::vector<const BiGraph*> visited;
    visited.reserve(order.size());
    for (std::size_t idx : order) visited.push_back(graphs[idx]);
    result.epoch_losses.push_back(
        evaluate(result.params, cfg, visited).mean_loss);
  }
  return result;
}

EvalResult evaluate(const ParamStore& params, const ModelConfig& cfg,
                    const std::vector<const BiGraph*>& graphs) {
  if (graphs.empty()) {
    throw std::invalid_argument("cannot evaluate an empty set");
  }
  const BiGatParams view = view_params(params, cfg);
  EvalResult out;
  out.predictions.reserve(graphs.size());
  double total = 0.0;
  for (const BiGraph* g : graphs) {
    out.predictions.push_back(bigat_forward(view, cfg, *g));
    total += cross_entropy(out.predictions.back().probs, g->label).at(0);
  }
  out.mean_loss = total / static_cast<double>(graphs.size());
  return out;
}

}  // namespace fedgat
