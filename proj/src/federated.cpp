#include "fedgat/federated.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>

#include "fedgat/errors.hpp"

namespace fedgat {

Aggregation aggregation_from_string(std::string_view text) {
  if (text == "uniform") return Aggregation::Uniform;
  if (text == "data-weighted" || text == "data_weighted") {
    return Aggregation::DataWeighted;
  }
  throw ConfigError("unknown aggregation \"" + std::string(text) +
                    "\" (expected uniform or data-weighted)");
}

std::string_view aggregation_to_string(Aggregation mode) {
  return mode == Aggregation::Uniform ? "uniform" : "data-weighted";
}

std::vector<std::size_t> sample_clients(std::size_t m, std::size_t k,
                                        Rng& rng) {
  if (k < 1 || k > m) {
    throw ConfigError("cannot sample " + std::to_string(k) + " of " +
                      std::to_string(m) + " clients");
  }
  std::vector<std::size_t> ids(m);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(m - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<double> mix_local(const std::vector<double>& local,
                              const std::vector<double>& global_params,
                              double lambda) {
  if (local.size() != global_params.size()) {
    throw std::invalid_argument(
        "mix: local has " + std::to_string(local.size()) +
        " values, global has " + std::to_string(global_params.size()));
  }
  if (lambda < 0.0 || lambda > 1.0) {
    throw ConfigError("lambda must lie in [0, 1]");
  }
  if (lambda == 0.0) return local;
  if (lambda == 1.0) return global_params;
  std::vector<double> out(local.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mixed = (1.0 - lambda) * local[i] + lambda * global_params[i];
    const double lo = std::min(local[i], global_params[i]);
    const double hi = std::max(local[i], global_params[i]);
    out[i] = std::clamp(mixed, lo, hi);
  }
  return out;
}

std::vector<double> aggregate(
    const std::vector<double>& global_params,
    const std::vector<std::pair<std::vector<double>, std::size_t>>& updates,
    Aggregation mode) {
  if (updates.empty()) {
    throw std::invalid_argument("aggregate needs at least one update");
  }
  for (const auto& [values, n] : updates) {
    if (values.size() != global_params.size()) {
      throw std::invalid_argument("update length " +
                                  std::to_string(values.size()) +
                                  " does not match the global model");
    }
  }
  if (updates.size() == 1) return updates[0].first;

  std::vector<double> weights(updates.size());
  if (mode == Aggregation::Uniform) {
    std::fill(weights.begin(), weights.end(),
              1.0 / static_cast<double>(updates.size()));
  } else {
    std::size_t total = 0;
    for (const auto& [values, n] : updates) total += n;
    if (total == 0) {
      throw std::invalid_argument("data-weighted aggregation with no data");
    }
    for (std::size_t i = 0; i < updates.size(); ++i) {
      weights[i] = static_cast<double>(updates[i].second) /
                   static_cast<double>(total);
    }
  }

  std::vector<double> out(global_params);
  for (std::size_t u = 0; u < updates.size(); ++u) {
    const auto& values = updates[u].first;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] += weights[u] * (values[i] - global_params[i]);
    }
  }
  return out;
}

double client_objective(const std::vector<double>& losses, std::size_t n) {
  if (losses.empty()) {
    throw std::invalid_argument("client objective over no events");
  }
  if (losses.size() != n) {
    throw std::invalid_argument("expected " + std::to_string(n) +
                                " loss terms, got " +
                                std::to_string(losses.size()));
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(n);
}

double global_objective(
    const std::vector<std::pair<double, std::size_t>>& client_terms) {
  std::size_t total = 0;
  for (const auto& [objective, n] : client_terms) total += n;
  if (total == 0) {
    throw std::invalid_argument("global objective over no data");
  }
  double out = 0.0;
  for (const auto& [objective, n] : client_terms) {
    out += objective * (static_cast<double>(n) / static_cast<double>(total));
  }
  return out;
}

namespace {

std::vector<const BiGraph*> resolve(const std::vector<BiGraph>& graphs,
                                    const std::vector<std::size_t>& indices) {
  std::vector<const BiGraph*> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) out.push_back(&graphs.at(idx));
  return out;
}

}  // namespace

RoundRecord run_round(ServerState& server, std::vector<ClientState>& clients,
                      const FedConfig& cfg, const ModelConfig& model_cfg,
                      const std::vector<BiGraph>& graphs) {
  const auto started = std::chrono::steady_clock::now();
  if (clients.size() != cfg.clients) {
    throw std::invalid_argument("expected " + std::to_string(cfg.clients) +
                                " clients, have " +
                                std::to_string(clients.size()));
  }

  RoundRecord record;
  record.round = server.round;
  Rng sample_rng(round_sample_seed(cfg.seed, server.round));
  record.sampled = sample_clients(cfg.clients, cfg.sampled, sample_rng);

  const std::vector<double> global_flat = server.global.flatten();
  std::vector<std::pair<std::vector<double>, std::size_t>> updates;
  updates.reserve(record.sampled.size());
  for (std::size_t id : record.sampled) {
    ClientState& client = clients.at(id);
    client.params.unflatten(
        mix_local(client.params.flatten(), global_flat, cfg.lambda));

    TrainResult trained = train_local(
        client.params, model_cfg, resolve(graphs, client.partition.train),
        cfg.local_epochs, client.adam,
        client_shuffle_base(cfg.seed, client.client_id),
        server.round * cfg.local_epochs, cfg.batch_size);
    client.params = std::move(trained.params);
    record.client_losses.push_back(trained.epoch_losses.back());
    updates.emplace_back(client.params.flatten(), client.train_count);
  }

  server.global.unflatten(aggregate(global_flat, updates, cfg.aggregation));
  if (!server.val_set.empty()) {
    record.val_loss =
        evaluate(server.global, model_cfg, resolve(graphs, server.val_set))
            .mean_loss;
  }
  server.round += 1;

  record.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  server.history.push_back(record);
  return record;
}

void run_training(ServerState& server, std::vector<ClientState>& clients,
                  const FedConfig& cfg, const ModelConfig& model_cfg,
                  const std::vector<BiGraph>& graphs) {
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    run_round(server, clients, cfg, model_cfg, graphs);
  }
}

std::vector<ClientState> make_clients(
    const ParamStore& initial, const std::vector<ClientPartition>& partitions,
    const AdamConfig& opt) {
  std::vector<ClientState> clients;
  clients.reserve(partitions.size());
  for (const ClientPartition& part : partitions) {
    clients.emplace_back(part.client_id, initial, part, opt);
  }
  return clients;
}

ServerState make_server(ParamStore initial,
                        const std::vector<ClientPartition>& partitions) {
  ServerState server;
  server.global = std::move(initial);
  for (const ClientPartition& part : partitions) {
    server.val_set.insert(server.val_set.end(), part.val.begin(),
                          part.val.end());
  }
  std::sort(server.val_set.begin(), server.val_set.end());
  return server;
}

}  // namespace fedgat
