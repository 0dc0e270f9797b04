#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "fedgat/adam.hpp"
#include "fedgat/bigraph.hpp"
#include "fedgat/dataset.hpp"
#include "fedgat/gat.hpp"
#include "fedgat/param_store.hpp"
#include "fedgat/rng.hpp"

namespace fedgat {

enum class Aggregation { Uniform, DataWeighted };

Aggregation aggregation_from_string(std::string_view text);
std::string_view aggregation_to_string(Aggregation mode);

struct FedConfig {
  std::size_t clients = 2;       // m, total
  std::size_t sampled = 2;       // k, participating per round
  double lambda = 0.2;           // pull toward the global model before training
  std::size_t local_epochs = 2;  // a
  std::size_t rounds = 15;       // b
  std::size_t batch_size = 1;
  Aggregation aggregation = Aggregation::Uniform;
  std::uint64_t seed = 0;
};

// Seed streams under the run seed. Exposed so a test can replay the exact
// schedule a run used.
inline constexpr std::uint64_t kSampleStream = 11;
inline constexpr std::uint64_t kShuffleStream = 12;

// Per-round sampling generator and per-client epoch-shuffle base.
inline std::uint64_t round_sample_seed(std::uint64_t seed, std::size_t round) {
  return derive_seed(seed, {kSampleStream, round});
}
inline std::uint64_t client_shuffle_base(std::uint64_t seed,
                                         std::size_t client_id) {
  return derive_seed(seed, {kShuffleStream, client_id});
}

struct ClientState {
  std::size_t client_id;
  ParamStore params;  // local model F_i
  ClientPartition partition;
  std::size_t train_count;  // n_i
  AdamState adam;

  ClientState(std::size_t id, ParamStore initial, ClientPartition part,
              const AdamConfig& opt)
      : client_id(id),
        params(std::move(initial)),
        partition(std::move(part)),
        train_count(partition.train.size()),
        adam(params, opt) {}
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::size_t> sampled;
  std::vector<double> client_losses;  // aligned with `sampled`
  std::optional<double> val_loss;     // absent when there is no validation set
  std::int64_t wall_ms = 0;
};

struct ServerState {
  ParamStore global;  // G
  std::size_t round = 0;
  std::vector<std::size_t> val_set;  // union of the client validation shards
  std::vector<RoundRecord> history;
};

// Uniform sample of k distinct client ids out of m, ascending.
std::vector<std::size_t> sample_clients(std::size_t m, std::size_t k, Rng& rng);

// (1-lambda)*local + lambda*global, elementwise; the limits lambda=0 and
// lambda=1 return the respective input exactly, and every output coordinate
// lies in the closed interval between its two inputs.
std::vector<double> mix_local(const std::vector<double>& local,
                              const std::vector<double>& global_params,
                              double lambda);

// Delta-form FedAvg: uniform weighs every update 1/k, data-weighted weighs by
// n_i/n. A lone update is adopted verbatim, and if every update equals the
// global vector the result is the global vector, both exactly.
std::vector<double> aggregate(
    const std::vector<double>& global_params,
    const std::vector<std::pair<std::vector<double>, std::size_t>>& updates,
    Aggregation mode);

// Mean per-event loss of one client; n must match the number of terms.
double client_objective(const std::vector<double>& losses, std::size_t n);

// Data-volume-weighted combination of client objectives.
double global_objective(
    const std::vector<std::pair<double, std::size_t>>& client_terms);

// One federated round: sample k clients, pull each toward the global model,
// train locally, aggregate, validate. Appends to server.history and advances
// server.round.
RoundRecord run_round(ServerState& server, std::vector<ClientState>& clients,
                      const FedConfig& cfg, const ModelConfig& model_cfg,
                      const std::vector<BiGraph>& graphs);

// cfg.rounds rounds of run_round.
void run_training(ServerState& server, std::vector<ClientState>& clients,
                  const FedConfig& cfg, const ModelConfig& model_cfg,
                  const std::vector<BiGraph>& graphs);

// Initial states: every client starts from the global parameters; the server
// validation set is the union of client validation shards.
std::vector<ClientState> make_clients(
    const ParamStore& initial, const std::vector<ClientPartition>& partitions,
    const AdamConfig& opt);
ServerState make_server(ParamStore initial,
                        const std::vector<ClientPartition>& partitions);

}  // namespace fedgat
