#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "fedgat/errors.hpp"
#include "fedgat/federated.hpp"
#include "fedgat/gat.hpp"
#include "fedgat/rng.hpp"

using namespace fedgat;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden_dim = 3;
  cfg.heads = 2;
  return cfg;
}

BiGraph random_tree(std::size_t n, std::size_t input_dim, Rng& rng,
                    int label) {
  BiGraph g;
  std::vector<double> vals(n * input_dim);
  for (auto& v : vals) v = rng.uniform(-1.0, 1.0);
  g.features = Tensor({n, input_dim}, std::move(vals));
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t parent = rng.below(i);
    g.td_edges.emplace_back(parent, i);
    g.bu_edges.emplace_back(i, parent);
  }
  g.label = label;
  g.root = 0;
  return g;
}

std::vector<BiGraph> graph_pool(std::size_t count, const ModelConfig& cfg,
                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BiGraph> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(
        random_tree(3 + rng.below(4), cfg.input_dim, rng, static_cast<int>(i % 4)));
  }
  return out;
}

std::vector<const BiGraph*> resolve(const std::vector<BiGraph>& graphs,
                                    const std::vector<std::size_t>& indices) {
  std::vector<const BiGraph*> out;
  for (std::size_t idx : indices) out.push_back(&graphs[idx]);
  return out;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() ||
          std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

bool stores_equal(const ParamStore& a, const ParamStore& b) {
  return ParamStore::same_schema(a, b) && bits_equal(a.flatten(), b.flatten());
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  for (auto& v : out) v = rng.uniform(-2.0, 2.0);
  return out;
}

}  // namespace

TEST_CASE("sampling k of m clients") {
  SUBCASE("k equal to m returns every id in order") {
    Rng rng(3);
    CHECK(sample_clients(5, 5, rng) ==
          std::vector<std::size_t>{0, 1, 2, 3, 4});
  }

  SUBCASE("same seed gives the same sample") {
    Rng a(round_sample_seed(42, 7));
    Rng b(round_sample_seed(42, 7));
    CHECK(sample_clients(10, 3, a) == sample_clients(10, 3, b));
    Rng c(round_sample_seed(42, 8));
    Rng d(round_sample_seed(43, 7));
    const auto base = [] {
      Rng r(round_sample_seed(42, 7));
      return sample_clients(10, 3, r);
    }();
    // Different round or base seed should decorrelate; equality of both
    // would mean the stream tags are ignored.
    CHECK_FALSE((sample_clients(10, 3, c) == base &&
                 sample_clients(10, 3, d) == base));
  }

  SUBCASE("samples are sorted, distinct, and in range") {
    for (std::uint64_t s = 0; s < 50; ++s) {
      Rng rng(round_sample_seed(5, s));
      const auto ids = sample_clients(10, 4, rng);
      REQUIRE(ids.size() == 4);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        CHECK(ids[i] < 10);
        if (i > 0) CHECK(ids[i - 1] < ids[i]);
      }
    }
  }

  SUBCASE("every client is drawn near-uniformly") {
    std::array<std::size_t, 4> counts{};
    for (std::uint64_t t = 0; t < 10000; ++t) {
      Rng rng(round_sample_seed(7, t));
      counts[sample_clients(4, 1, rng)[0]] += 1;
    }
    for (std::size_t c : counts) {
      CHECK(c > 2350);
      CHECK(c < 2650);
    }
  }

  SUBCASE("invalid k is rejected") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_clients(3, 4, rng), ConfigError);
    CHECK_THROWS_AS(sample_clients(3, 0, rng), ConfigError);
  }
}

TEST_CASE("mixing a local model toward the global model") {
  const std::vector<double> local{1.0, 1.0};
  const std::vector<double> global_params{0.0, 2.0};

  SUBCASE("lambda 0 returns the local model exactly") {
    CHECK(bits_equal(mix_local(local, global_params, 0.0), local));
  }

  SUBCASE("lambda 1 returns the global model exactly") {
    CHECK(bits_equal(mix_local(local, global_params, 1.0), global_params));
  }

  SUBCASE("interior lambda interpolates coordinatewise") {
    const auto mixed = mix_local(local, global_params, 0.2);
    REQUIRE(mixed.size() == 2);
    CHECK(mixed[0] == (1.0 - 0.2) * 1.0 + 0.2 * 0.0);
    CHECK(mixed[1] == (1.0 - 0.2) * 1.0 + 0.2 * 2.0);
    CHECK(mixed[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(mixed[1] == doctest::Approx(1.2).epsilon(1e-12));
  }

  SUBCASE("every output lies between its two inputs") {
    Rng rng(11);
    for (double lambda : {1e-16, 0.1, 0.5, 0.9, 1.0 - 1e-16}) {
      const auto l = random_vector(64, rng);
      const auto g = random_vector(64, rng);
      const auto mixed = mix_local(l, g, lambda);
      for (std::size_t i = 0; i < mixed.size(); ++i) {
        CHECK(mixed[i] >= std::min(l[i], g[i]));
        CHECK(mixed[i] <= std::max(l[i], g[i]));
      }
    }
  }

  SUBCASE("mismatched lengths are rejected") {
    CHECK_THROWS_AS(mix_local({1.0}, global_params, 0.5),
                    std::invalid_argument);
  }

  SUBCASE("lambda outside the unit interval is rejected") {
    CHECK_THROWS_AS(mix_local(local, global_params, -0.1), ConfigError);
    CHECK_THROWS_AS(mix_local(local, global_params, 1.5), ConfigError);
  }
}

TEST_CASE("aggregating client updates") {
  Rng rng(21);
  const auto global_params = random_vector(33, rng);

  SUBCASE("identical updates leave the global model bit-identical") {
    // Weights 1/7, 2/7, 4/7 do not sum to 1 in floating point, so a plain
    // weighted sum of the updates would drift here.
    const std::vector<std::pair<std::vector<double>, std::size_t>> updates{
        {global_params, 1}, {global_params, 2}, {global_params, 4}};
    CHECK(bits_equal(aggregate(global_params, updates, Aggregation::Uniform),
                     global_params));
    CHECK(bits_equal(
        aggregate(global_params, updates, Aggregation::DataWeighted),
        global_params));
  }

  SUBCASE("a single update is adopted verbatim") {
    const auto update = random_vector(33, rng);
    const std::vector<std::pair<std::vector<double>, std::size_t>> updates{
        {update, 7}};
    CHECK(bits_equal(aggregate(global_params, updates, Aggregation::Uniform),
                     update));
    CHECK(bits_equal(
        aggregate(global_params, updates, Aggregation::DataWeighted), update));
  }

  SUBCASE("hand-checked two-client average") {
    const std::vector<double> origin{0.0};
    const std::vector<std::pair<std::vector<double>, std::size_t>> updates{
        {{2.0}, 10}, {{4.0}, 30}};
    CHECK(aggregate(origin, updates, Aggregation::Uniform)[0] == 3.0);
    CHECK(aggregate(origin, updates, Aggregation::DataWeighted)[0] == 3.5);
  }

  SUBCASE("no updates is an error") {
    CHECK_THROWS_AS(aggregate(global_params, {}, Aggregation::Uniform),
                    std::invalid_argument);
  }

  SUBCASE("update length must match the global model") {
    const std::vector<std::pair<std::vector<double>, std::size_t>> updates{
        {{1.0, 2.0}, 1}};
    CHECK_THROWS_AS(aggregate(global_params, updates, Aggregation::Uniform),
                    std::invalid_argument);
  }

  SUBCASE("data-weighted aggregation needs data") {
    const std::vector<std::pair<std::vector<double>, std::size_t>> updates{
        {global_params, 0}, {global_params, 0}};
    CHECK_THROWS_AS(
        aggregate(global_params, updates, Aggregation::DataWeighted),
        std::invalid_argument);
  }

  SUBCASE("mode names round-trip") {
    CHECK(aggregation_from_string("uniform") == Aggregation::Uniform);
    CHECK(aggregation_from_string("data-weighted") ==
          Aggregation::DataWeighted);
    CHECK(aggregation_from_string("data_weighted") ==
          Aggregation::DataWeighted);
    CHECK(aggregation_to_string(Aggregation::Uniform) == "uniform");
    CHECK(aggregation_to_string(Aggregation::DataWeighted) == "data-weighted");
    CHECK_THROWS_AS(aggregation_from_string("median"), ConfigError);
  }
}

TEST_CASE("client objective is the mean event loss") {
  CHECK(client_objective({0.7}, 1) == 0.7);
  CHECK(client_objective({1.0, 2.0, 3.0}, 3) == 2.0);
  CHECK_THROWS_AS(client_objective({}, 0), std::invalid_argument);
  CHECK_THROWS_AS(client_objective({1.0, 2.0}, 3), std::invalid_argument);
}

TEST_CASE("client objective matches a per-event re-evaluation") {
  const ModelConfig cfg = small_config();
  const auto graphs = graph_pool(20, cfg, 31);
  const ParamStore params = init_bigat_params(cfg, 31);

  std::vector<double> losses;
  for (const BiGraph& g : graphs) {
    losses.push_back(evaluate(params, cfg, {&g}).mean_loss);
  }
  const double whole =
      evaluate(params, cfg, resolve(graphs, [&] {
                 std::vector<std::size_t> all(graphs.size());
                 std::iota(all.begin(), all.end(), 0);
                 return all;
               }()))
          .mean_loss;
  CHECK(client_objective(losses, graphs.size()) == whole);
}

TEST_CASE("global objective weighs clients by data volume") {
  CHECK(global_objective({{1.0, 5}, {3.0, 5}}) == 2.0);
  CHECK(global_objective({{0.42, 17}}) == 0.42);

  const double a = 0.9;
  const double b = 1.7;
  const double expected = a * (1490.0 / 2308.0) + b * (818.0 / 2308.0);
  CHECK(global_objective({{a, 1490}, {b, 818}}) == expected);
  CHECK(global_objective({{a, 1490}, {b, 818}}) ==
        doctest::Approx((1490.0 * a + 818.0 * b) / 2308.0).epsilon(1e-12));

  CHECK_THROWS_AS(global_objective({}), std::invalid_argument);
  CHECK_THROWS_AS(global_objective({{1.0, 0}}), std::invalid_argument);
}

TEST_CASE("initial client and server states") {
  const ModelConfig cfg = small_config();
  const ParamStore initial = init_bigat_params(cfg, 17);
  const std::vector<ClientPartition> partitions{
      {0, {0, 1, 2}, {5, 3}},
      {1, {4, 6}, {7}},
  };

  const auto clients = make_clients(initial, partitions, AdamConfig{});
  REQUIRE(clients.size() == 2);
  CHECK(clients[0].client_id == 0);
  CHECK(clients[1].client_id == 1);
  CHECK(clients[0].train_count == 3);
  CHECK(clients[1].train_count == 2);
  CHECK(stores_equal(clients[0].params, initial));
  CHECK(stores_equal(clients[1].params, initial));
  CHECK(clients[0].adam.step_count() == 0);

  const ServerState server = make_server(initial, partitions);
  CHECK(stores_equal(server.global, initial));
  CHECK(server.round == 0);
  CHECK(server.val_set == std::vector<std::size_t>{3, 5, 7});
  CHECK(server.history.empty());
}

TEST_CASE("a driven round matches a scripted replay of its primitives") {
  const ModelConfig model = small_config();
  const auto graphs = graph_pool(12, model, 77);
  const std::vector<ClientPartition> partitions{
      {0, {0, 1, 2, 3}, {8, 9}},
      {1, {4, 5, 6, 7}, {10, 11}},
  };
  FedConfig fed;
  fed.clients = 2;
  fed.sampled = 1;
  fed.lambda = 0.2;
  fed.local_epochs = 2;
  fed.rounds = 3;
  fed.seed = 99;

  const AdamConfig opt{};
  const ParamStore initial = init_bigat_params(model, 5);

  auto clients = make_clients(initial, partitions, opt);
  ServerState server = make_server(initial, partitions);

  auto replay_clients = make_clients(initial, partitions, opt);
  ServerState replay_server = make_server(initial, partitions);

  for (std::size_t t = 0; t < fed.rounds; ++t) {
    const RoundRecord rec = run_round(server, clients, fed, model, graphs);

    // Replay the same round step by step from the documented schedule.
    Rng rng(round_sample_seed(fed.seed, t));
    const auto sampled = sample_clients(fed.clients, fed.sampled, rng);
    const auto global_flat = replay_server.global.flatten();
    std::vector<std::pair<std::vector<double>, std::size_t>> updates;
    std::vector<double> losses;
    for (std::size_t id : sampled) {
      ClientState& c = replay_clients[id];
      c.params.unflatten(mix_local(c.params.flatten(), global_flat, fed.lambda));
      TrainResult tr = train_local(
          c.params, model, resolve(graphs, c.partition.train),
          fed.local_epochs, c.adam, client_shuffle_base(fed.seed, id),
          t * fed.local_epochs, fed.batch_size);
      c.params = std::move(tr.params);
      losses.push_back(tr.epoch_losses.back());
      updates.emplace_back(c.params.flatten(), c.train_count);
    }
    replay_server.global.unflatten(
        aggregate(global_flat, updates, fed.aggregation));
    const double val =
        evaluate(replay_server.global, model,
                 resolve(graphs, replay_server.val_set))
            .mean_loss;

    CHECK(rec.round == t);
    CHECK(rec.sampled == sampled);
    CHECK(bits_equal(rec.client_losses, losses));
    REQUIRE(rec.val_loss.has_value());
    CHECK(*rec.val_loss == val);
    CHECK(stores_equal(server.global, replay_server.global));
    for (std::size_t id = 0; id < clients.size(); ++id) {
      CHECK(stores_equal(clients[id].params, replay_clients[id].params));
    }
  }
  CHECK(server.round == fed.rounds);
  CHECK(server.history.size() == fed.rounds);
}

TEST_CASE("data-weighted rounds use shard sizes in the aggregate") {
  const ModelConfig model = small_config();
  const auto graphs = graph_pool(8, model, 123);
  const std::vector<ClientPartition> partitions{
      {0, {0, 1, 2, 3}, {}},
      {1, {4, 5}, {6, 7}},
  };
  FedConfig fed;
  fed.clients = 2;
  fed.sampled = 2;
  fed.lambda = 0.5;
  fed.local_epochs = 1;
  fed.rounds = 1;
  fed.aggregation = Aggregation::DataWeighted;
  fed.seed = 4;

  const ParamStore initial = init_bigat_params(model, 9);
  auto clients = make_clients(initial, partitions, AdamConfig{});
  ServerState server = make_server(initial, partitions);
  const auto before = server.global.flatten();

  const RoundRecord rec = run_round(server, clients, fed, model, graphs);
  CHECK(rec.sampled == std::vector<std::size_t>{0, 1});

  const std::vector<std::pair<std::vector<double>, std::size_t>> updates{
      {clients[0].params.flatten(), 4}, {clients[1].params.flatten(), 2}};
  CHECK(bits_equal(server.global.flatten(),
                   aggregate(before, updates, Aggregation::DataWeighted)));
}

TEST_CASE("zero learning rate and full pull keep every model fixed") {
  const ModelConfig model = small_config();
  const auto graphs = graph_pool(6, model, 55);
  const std::vector<ClientPartition> partitions{
      {0, {0, 1, 2}, {4}},
      {1, {3}, {5}},
  };
  FedConfig fed;
  fed.clients = 2;
  fed.sampled = 2;
  fed.lambda = 1.0;
  fed.local_epochs = 2;
  fed.rounds = 2;
  fed.seed = 8;

  AdamConfig opt;
  opt.learning_rate = 0.0;
  const ParamStore initial = init_bigat_params(model, 14);

  for (Aggregation mode :
       {Aggregation::Uniform, Aggregation::DataWeighted}) {
    fed.aggregation = mode;
    auto clients = make_clients(initial, partitions, opt);
    ServerState server = make_server(initial, partitions);
    run_training(server, clients, fed, model, graphs);
    CHECK(stores_equal(server.global, initial));
    CHECK(stores_equal(clients[0].params, initial));
    CHECK(stores_equal(clients[1].params, initial));
  }
}

TEST_CASE("one client with full pull is a continuous local run") {
  const ModelConfig model = small_config();
  const auto graphs = graph_pool(6, model, 66);
  std::vector<std::size_t> all(graphs.size());
  std::iota(all.begin(), all.end(), 0);
  const std::vector<ClientPartition> partitions{{0, all, {}}};

  FedConfig fed;
  fed.clients = 1;
  fed.sampled = 1;
  fed.lambda = 1.0;
  fed.local_epochs = 2;
  fed.rounds = 3;
  fed.seed = 2;

  const AdamConfig opt{};
  const ParamStore initial = init_bigat_params(model, 7);

  auto clients = make_clients(initial, partitions, opt);
  ServerState server = make_server(initial, partitions);
  run_training(server, clients, fed, model, graphs);

  AdamState adam(initial, opt);
  const TrainResult continuous =
      train_local(initial, model, resolve(graphs, all),
                  fed.local_epochs * fed.rounds, adam,
                  client_shuffle_base(fed.seed, 0), 0, fed.batch_size);

  CHECK(stores_equal(server.global, continuous.params));
  CHECK(stores_equal(clients[0].params, continuous.params));
  REQUIRE(server.history.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    const RoundRecord& rec = server.history[t];
    REQUIRE(rec.client_losses.size() == 1);
    CHECK(rec.client_losses[0] ==
          continuous.epoch_losses[t * fed.local_epochs + fed.local_epochs - 1]);
    CHECK_FALSE(rec.val_loss.has_value());
  }
}

TEST_CASE("round history bookkeeping") {
  const ModelConfig model = small_config();
  const auto graphs = graph_pool(9, model, 88);
  const std::vector<ClientPartition> partitions{
      {0, {0, 1}, {6}},
      {1, {2, 3}, {7}},
      {2, {4, 5}, {8}},
  };
  FedConfig fed;
  fed.clients = 3;
  fed.sampled = 2;
  fed.lambda = 0.2;
  fed.local_epochs = 1;
  fed.rounds = 4;
  fed.seed = 12;

  const ParamStore initial = init_bigat_params(model, 20);
  auto clients = make_clients(initial, partitions, AdamConfig{});
  ServerState server = make_server(initial, partitions);
  run_training(server, clients, fed, model, graphs);

  REQUIRE(server.history.size() == 4);
  for (std::size_t t = 0; t < 4; ++t) {
    const RoundRecord& rec = server.history[t];
    CHECK(rec.round == t);
    CHECK(rec.sampled.size() == 2);
    CHECK(rec.client_losses.size() == 2);
    CHECK(rec.val_loss.has_value());
    CHECK(rec.wall_ms >= 0);
  }
  CHECK(server.round == 4);
}

TEST_CASE("a round rejects a roster of the wrong size") {
  const ModelConfig model = small_config();
  const auto graphs = graph_pool(4, model, 99);
  const std::vector<ClientPartition> partitions{{0, {0, 1}, {2, 3}}};
  FedConfig fed;
  fed.clients = 2;
  fed.sampled = 1;

  const ParamStore initial = init_bigat_params(model, 3);
  auto clients = make_clients(initial, partitions, AdamConfig{});
  ServerState server = make_server(initial, partitions);
  CHECK_THROWS_AS(run_round(server, clients, fed, model, graphs),
                  std::invalid_argument);
}
