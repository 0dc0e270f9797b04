#include "fedgat/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fedgat/bigraph.hpp"
#include "fedgat/checkpoint.hpp"
#include "fedgat/errors.hpp"
#include "fedgat/log.hpp"
#include "fedgat/rng.hpp"
#include "json.hpp"

namespace fedgat {

namespace {

using Json = nlohmann::ordered_json;

void complain(std::vector<std::string>& issues, const std::string& path,
              const std::string& what) {
  issues.push_back(path + ": " + what);
}

void check_keys(const Json& obj, const std::set<std::string>& allowed,
                const std::string& path, std::vector<std::string>& issues) {
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0) {
      complain(issues, path.empty() ? key : path + "." + key,
               "unknown field");
    }
  }
}

const Json* section(const Json& obj, const char* key, const std::string& path,
                    std::vector<std::string>& issues) {
  if (!obj.contains(key)) return nullptr;
  const Json& child = obj.at(key);
  if (!child.is_object()) {
    complain(issues, path, "must be an object");
    return nullptr;
  }
  return &child;
}

double get_double(const Json& obj, const char* key, double fallback,
                  const std::string& path, std::vector<std::string>& issues) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number()) {
    complain(issues, path, "must be a number");
    return fallback;
  }
  return v.get<double>();
}

std::size_t get_count(const Json& obj, const char* key, std::size_t fallback,
                      const std::string& path,
                      std::vector<std::string>& issues) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    complain(issues, path, "must be a non-negative integer");
    return fallback;
  }
  return v.get<std::size_t>();
}

std::string get_string(const Json& obj, const char* key,
                       const std::string& fallback, const std::string& path,
                       std::vector<std::string>& issues) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_string()) {
    complain(issues, path, "must be a string");
    return fallback;
  }
  return v.get<std::string>();
}

template <typename Enum, typename Parser>
Enum get_enum(const Json& obj, const char* key, Enum fallback, Parser parse,
              const std::string& path, std::vector<std::string>& issues) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_string()) {
    complain(issues, path, "must be a string");
    return fallback;
  }
  try {
    return parse(v.get<std::string>());
  } catch (const ConfigError& e) {
    complain(issues, path, e.what());
    return fallback;
  }
}

std::vector<DatasetSpec> parse_datasets(const Json& root,
                                        std::vector<std::string>& issues) {
  std::vector<DatasetSpec> out;
  if (!root.contains("datasets")) {
    complain(issues, "datasets", "required");
    return out;
  }
  const Json& list = root.at("datasets");
  if (!list.is_array() || list.empty()) {
    complain(issues, "datasets", "must be a non-empty array");
    return out;
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "datasets[" + std::to_string(i) + "]";
    const Json& entry = list.at(i);
    if (!entry.is_object()) {
      complain(issues, path, "must be an object");
      continue;
    }
    check_keys(entry, {"name", "jsonl", "tree_dir", "label_file"}, path,
               issues);
    DatasetSpec spec;
    spec.name = get_string(entry, "name", "", path + ".name", issues);
    spec.jsonl = get_string(entry, "jsonl", "", path + ".jsonl", issues);
    spec.tree_dir =
        get_string(entry, "tree_dir", "", path + ".tree_dir", issues);
    spec.label_file =
        get_string(entry, "label_file", "", path + ".label_file", issues);
    if (spec.name.empty()) {
      complain(issues, path + ".name", "required and non-empty");
    } else if (!names.insert(spec.name).second) {
      complain(issues, path + ".name",
               "duplicate dataset name \"" + spec.name + "\"");
    }
    const bool has_jsonl = !spec.jsonl.empty();
    const bool has_raw = !spec.tree_dir.empty() || !spec.label_file.empty();
    if (has_jsonl == has_raw) {
      complain(issues, path,
               "needs exactly one of jsonl or tree_dir+label_file");
    } else if (has_raw && (spec.tree_dir.empty() || spec.label_file.empty())) {
      complain(issues, path, "tree_dir and label_file go together");
    }
    out.push_back(std::move(spec));
  }
  return out;
}

ExperimentConfig parse_config_object(const Json& root,
                                     std::vector<std::string>& issues) {
  check_keys(root,
             {"format_version", "datasets", "split", "partition", "federated",
              "model", "features", "optimizer", "seed", "output_dir"},
             "", issues);
  ExperimentConfig cfg;

  if (root.contains("format_version")) {
    const std::size_t v =
        get_count(root, "format_version", kRunFormatVersion, "format_version",
                  issues);
    if (v != static_cast<std::size_t>(kRunFormatVersion)) {
      complain(issues, "format_version",
               "unsupported version " + std::to_string(v) + " (this build "
               "writes version " + std::to_string(kRunFormatVersion) + ")");
    }
  }

  cfg.datasets = parse_datasets(root, issues);

  if (const Json* split = section(root, "split", "split", issues)) {
    check_keys(*split, {"train", "val", "test"}, "split", issues);
    cfg.split[0] = get_double(*split, "train", 0.7, "split.train", issues);
    cfg.split[1] = get_double(*split, "val", 0.1, "split.val", issues);
    cfg.split[2] = get_double(*split, "test", 0.2, "split.test", issues);
  }
  const char* ratio_names[3] = {"split.train", "split.val", "split.test"};
  double ratio_sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (cfg.split[i] < 0.0 || cfg.split[i] > 1.0) {
      complain(issues, ratio_names[i], "must lie in [0, 1]");
    }
    ratio_sum += cfg.split[i];
  }
  if (std::abs(ratio_sum - 1.0) > 1e-9) {
    complain(issues, "split", "ratios must sum to 1");
  }
  if (cfg.split[0] <= 0.0) {
    complain(issues, "split.train", "training fraction must be positive");
  }

  cfg.partition = get_enum(root, "partition", PartitionStrategy::Iid,
                           [](const std::string& s) {
                             return partition_strategy_from_string(s);
                           },
                           "partition", issues);

  if (const Json* fed = section(root, "federated", "federated", issues)) {
    check_keys(*fed,
               {"clients", "sampled", "lambda", "local_epochs", "rounds",
                "batch_size", "aggregation"},
               "federated", issues);
    cfg.federated.clients =
        get_count(*fed, "clients", 2, "federated.clients", issues);
    cfg.federated.sampled =
        get_count(*fed, "sampled", 2, "federated.sampled", issues);
    cfg.federated.lambda =
        get_double(*fed, "lambda", 0.2, "federated.lambda", issues);
    cfg.federated.local_epochs =
        get_count(*fed, "local_epochs", 2, "federated.local_epochs", issues);
    cfg.federated.rounds =
        get_count(*fed, "rounds", 15, "federated.rounds", issues);
    cfg.federated.batch_size =
        get_count(*fed, "batch_size", 1, "federated.batch_size", issues);
    cfg.federated.aggregation = get_enum(
        *fed, "aggregation", Aggregation::Uniform,
        [](const std::string& s) { return aggregation_from_string(s); },
        "federated.aggregation", issues);
  }
  if (cfg.federated.clients < 1) {
    complain(issues, "federated.clients", "must be at least 1");
  }
  if (cfg.federated.sampled < 1) {
    complain(issues, "federated.sampled", "must be at least 1");
  } else if (cfg.federated.sampled > cfg.federated.clients) {
    complain(issues, "federated.sampled",
             "cannot exceed federated.clients (" +
                 std::to_string(cfg.federated.sampled) + " > " +
                 std::to_string(cfg.federated.clients) + ")");
  }
  if (cfg.federated.lambda < 0.0 || cfg.federated.lambda > 1.0) {
    complain(issues, "federated.lambda", "must lie in [0, 1]");
  }
  if (cfg.federated.local_epochs < 1) {
    complain(issues, "federated.local_epochs", "must be at least 1");
  }
  if (cfg.federated.rounds < 1) {
    complain(issues, "federated.rounds", "must be at least 1");
  }
  if (cfg.federated.batch_size < 1) {
    complain(issues, "federated.batch_size", "must be at least 1");
  }
  if (cfg.partition == PartitionStrategy::ByDataset && !cfg.datasets.empty() &&
      cfg.federated.clients != cfg.datasets.size()) {
    complain(issues, "federated.clients",
             "by-dataset partitioning needs one client per dataset (" +
                 std::to_string(cfg.datasets.size()) + " datasets, clients=" +
                 std::to_string(cfg.federated.clients) + ")");
  }

  if (const Json* model = section(root, "model", "model", issues)) {
    check_keys(*model, {"heads", "hidden_dim", "pooling", "leaky_slope"},
               "model", issues);
    cfg.model.heads = get_count(*model, "heads", 5, "model.heads", issues);
    cfg.model.hidden_dim =
        get_count(*model, "hidden_dim", 64, "model.hidden_dim", issues);
    cfg.model.pooling = get_enum(
        *model, "pooling", Pooling::Mean,
        [](const std::string& s) { return pooling_from_string(s); },
        "model.pooling", issues);
    cfg.model.leaky_slope =
        get_double(*model, "leaky_slope", 0.2, "model.leaky_slope", issues);
  }
  if (cfg.model.heads < 1) {
    complain(issues, "model.heads", "must be at least 1");
  }
  if (cfg.model.hidden_dim < 1) {
    complain(issues, "model.hidden_dim", "must be at least 1");
  }
  if (cfg.model.leaky_slope <= 0.0 || cfg.model.leaky_slope >= 1.0) {
    complain(issues, "model.leaky_slope", "must lie in (0, 1)");
  }

  if (const Json* features = section(root, "features", "features", issues)) {
    check_keys(*features, {"vocab_size", "mode"}, "features", issues);
    cfg.features.vocab_size =
        get_count(*features, "vocab_size", 5000, "features.vocab_size",
                  issues);
    cfg.features.mode = get_enum(
        *features, "mode", FeatureMode::Tfidf,
        [](const std::string& s) { return feature_mode_from_string(s); },
        "features.mode", issues);
  }
  if (cfg.features.vocab_size < 1) {
    complain(issues, "features.vocab_size", "must be at least 1");
  }

  if (const Json* opt = section(root, "optimizer", "optimizer", issues)) {
    check_keys(*opt, {"learning_rate", "beta1", "beta2", "epsilon"},
               "optimizer", issues);
    cfg.optimizer.learning_rate = get_double(
        *opt, "learning_rate", 5e-3, "optimizer.learning_rate", issues);
    cfg.optimizer.beta1 =
        get_double(*opt, "beta1", 0.9, "optimizer.beta1", issues);
    cfg.optimizer.beta2 =
        get_double(*opt, "beta2", 0.999, "optimizer.beta2", issues);
    cfg.optimizer.epsilon =
        get_double(*opt, "epsilon", 1e-8, "optimizer.epsilon", issues);
  }
  if (!(cfg.optimizer.learning_rate >= 0.0) ||
      !std::isfinite(cfg.optimizer.learning_rate)) {
    complain(issues, "optimizer.learning_rate",
             "must be a finite non-negative number");
  }
  if (cfg.optimizer.beta1 < 0.0 || cfg.optimizer.beta1 >= 1.0) {
    complain(issues, "optimizer.beta1", "must lie in [0, 1)");
  }
  if (cfg.optimizer.beta2 < 0.0 || cfg.optimizer.beta2 >= 1.0) {
    complain(issues, "optimizer.beta2", "must lie in [0, 1)");
  }
  if (!(cfg.optimizer.epsilon > 0.0)) {
    complain(issues, "optimizer.epsilon", "must be positive");
  }

  if (root.contains("seed")) {
    const Json& v = root.at("seed");
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      complain(issues, "seed", "must be a non-negative integer");
    } else {
      cfg.seed = v.get<std::uint64_t>();
    }
  }
  cfg.federated.seed = cfg.seed;

  cfg.output_dir = get_string(root, "output_dir", "run", "output_dir", issues);
  if (cfg.output_dir.empty()) {
    complain(issues, "output_dir", "must be non-empty");
  }
  return cfg;
}

[[noreturn]] void throw_issues(const std::vector<std::string>& issues) {
  std::string message = "invalid configuration:";
  for (const auto& issue : issues) message += "\n  " + issue;
  throw ConfigError(message);
}

Json parse_document(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::string what = e.what();
    const auto pos = what.find("parse error");
    throw ConfigError(pos == std::string::npos ? what : what.substr(pos));
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << content;
  if (!out) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string short_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", value);
  return buf;
}

Json report_json(const MetricsReport& report) {
  return Json::parse(metrics_json(report));
}

MetricsReport report_for(const ParamStore& params, const ModelConfig& model,
                         const std::vector<BiGraph>& graphs,
                         const std::vector<std::size_t>& indices) {
  if (indices.empty()) return MetricsReport{};
  std::vector<const BiGraph*> subset;
  std::vector<int> labels;
  for (std::size_t idx : indices) {
    subset.push_back(&graphs[idx]);
    labels.push_back(graphs[idx].label);
  }
  const EvalResult eval = evaluate(params, model, subset);
  std::vector<int> predicted;
  predicted.reserve(eval.predictions.size());
  for (const Prediction& p : eval.predictions) {
    predicted.push_back(p.predicted_class);
  }
  return build_report(predicted, labels);
}

std::string history_jsonl(const std::vector<RoundRecord>& history) {
  std::string out;
  for (const RoundRecord& rec : history) {
    Json line;
    line["round"] = rec.round;
    line["sampled"] = rec.sampled;
    line["client_losses"] = rec.client_losses;
    if (rec.val_loss.has_value()) {
      line["val_loss"] = *rec.val_loss;
    } else {
      line["val_loss"] = nullptr;
    }
    line["wall_ms"] = rec.wall_ms;
    out += line.dump() + "\n";
  }
  return out;
}

std::string loss_curve_csv(const std::vector<RoundRecord>& history) {
  std::string out = "round,series,loss\n";
  for (const RoundRecord& rec : history) {
    if (rec.val_loss.has_value()) {
      out += std::to_string(rec.round) + ",server_val," +
             format_double(*rec.val_loss) + "\n";
    }
    for (std::size_t i = 0; i < rec.sampled.size(); ++i) {
      out += std::to_string(rec.round) + ",client_" +
             std::to_string(rec.sampled[i]) + "," +
             format_double(rec.client_losses[i]) + "\n";
    }
  }
  return out;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  const Json root = parse_document(text);
  if (!root.is_object()) {
    throw ConfigError("configuration must be a JSON object");
  }
  std::vector<std::string> issues;
  ExperimentConfig cfg = parse_config_object(root, issues);
  if (!issues.empty()) throw_issues(issues);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text_file(path));
}

std::string experiment_config_json(const ExperimentConfig& cfg) {
  Json root;
  root["format_version"] = kRunFormatVersion;
  root["datasets"] = Json::array();
  for (const DatasetSpec& spec : cfg.datasets) {
    Json entry;
    entry["name"] = spec.name;
    if (!spec.jsonl.empty()) {
      entry["jsonl"] = spec.jsonl;
    } else {
      entry["tree_dir"] = spec.tree_dir;
      entry["label_file"] = spec.label_file;
    }
    root["datasets"].push_back(entry);
  }
  root["split"]["train"] = cfg.split[0];
  root["split"]["val"] = cfg.split[1];
  root["split"]["test"] = cfg.split[2];
  root["partition"] = partition_strategy_to_string(cfg.partition);
  root["federated"]["clients"] = cfg.federated.clients;
  root["federated"]["sampled"] = cfg.federated.sampled;
  root["federated"]["lambda"] = cfg.federated.lambda;
  root["federated"]["local_epochs"] = cfg.federated.local_epochs;
  root["federated"]["rounds"] = cfg.federated.rounds;
  root["federated"]["batch_size"] = cfg.federated.batch_size;
  root["federated"]["aggregation"] =
      aggregation_to_string(cfg.federated.aggregation);
  root["model"]["heads"] = cfg.model.heads;
  root["model"]["hidden_dim"] = cfg.model.hidden_dim;
  root["model"]["pooling"] = pooling_to_string(cfg.model.pooling);
  root["model"]["leaky_slope"] = cfg.model.leaky_slope;
  root["features"]["vocab_size"] = cfg.features.vocab_size;
  root["features"]["mode"] = feature_mode_to_string(cfg.features.mode);
  root["optimizer"]["learning_rate"] = cfg.optimizer.learning_rate;
  root["optimizer"]["beta1"] = cfg.optimizer.beta1;
  root["optimizer"]["beta2"] = cfg.optimizer.beta2;
  root["optimizer"]["epsilon"] = cfg.optimizer.epsilon;
  root["seed"] = cfg.seed;
  root["output_dir"] = cfg.output_dir;
  return root.dump(2) + "\n";
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* seed = std::getenv("FEDGAT_SEED")) {
    try {
      std::size_t consumed = 0;
      const unsigned long long value = std::stoull(seed, &consumed);
      if (consumed != std::string(seed).size()) {
        throw std::invalid_argument("trailing characters");
      }
      cfg.seed = value;
      cfg.federated.seed = value;
    } catch (const std::exception&) {
      throw ConfigError("FEDGAT_SEED must be a non-negative integer, got \"" +
                        std::string(seed) + "\"");
    }
  }
  if (const char* dir = std::getenv("FEDGAT_OUTPUT_DIR")) {
    if (*dir == '\0') {
      throw ConfigError("FEDGAT_OUTPUT_DIR must be non-empty when set");
    }
    cfg.output_dir = dir;
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  std::vector<RawEvent> events;
  for (std::size_t i = 0; i < cfg.datasets.size(); ++i) {
    const DatasetSpec& spec = cfg.datasets[i];
    std::vector<RawEvent> part;
    if (!spec.jsonl.empty()) {
      part = read_events_jsonl(spec.jsonl);
    } else {
      part = load_raw_dataset(spec.tree_dir, spec.label_file);
    }
    if (part.empty()) {
      throw DatasetError("dataset \"" + spec.name + "\" holds no events");
    }
    for (RawEvent& event : part) event.source = i;
    events.insert(events.end(), std::make_move_iterator(part.begin()),
                  std::make_move_iterator(part.end()));
  }
  if (events.empty()) {
    throw DatasetError("no datasets configured");
  }

  const SplitIndices split = split_dataset(events, cfg.split, cfg.seed);

  std::vector<std::vector<std::string>> documents;
  for (std::size_t idx : split.train) {
    for (const Post& post : events[idx].posts) {
      documents.push_back(post.tokens);
    }
  }
  const Vocabulary vocab =
      build_vocabulary(documents, cfg.features.vocab_size);
  const CorpusStats stats{documents.size()};

  ModelConfig model = cfg.model;
  model.input_dim = vocab.size();
  std::vector<BiGraph> graphs;
  graphs.reserve(events.size());
  for (const RawEvent& event : events) {
    graphs.push_back(build_bigraph(event, vocab, stats, cfg.features.mode));
  }

  const auto partitions = partition_clients(
      events, split, cfg.federated.clients, cfg.partition, cfg.seed);

  FedConfig fed = cfg.federated;
  fed.seed = cfg.seed;
  const ParamStore initial =
      init_bigat_params(model, derive_seed(cfg.seed, {kInitStream}));
  auto clients = make_clients(initial, partitions, cfg.optimizer);
  ServerState server = make_server(initial, partitions);

  log::info("training " + std::to_string(fed.rounds) + " rounds on " +
            std::to_string(split.train.size()) + " train / " +
            std::to_string(split.val.size()) + " val / " +
            std::to_string(split.test.size()) + " test events, vocabulary " +
            std::to_string(vocab.size()));
  run_training(server, clients, fed, model, graphs);

  ExperimentResult result;
  result.history = server.history;
  result.vocabulary_size = vocab.size();
  result.val_metrics = report_for(server.global, model, graphs, split.val);
  result.test_metrics = report_for(server.global, model, graphs, split.test);

  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  write_text_file(dir / "config.resolved.json", experiment_config_json(cfg));
  write_text_file(dir / "history.jsonl", history_jsonl(server.history));
  write_text_file(dir / "loss_curve.csv", loss_curve_csv(server.history));

  Json metrics;
  metrics["validation"] =
      split.val.empty() ? Json(nullptr) : report_json(result.val_metrics);
  metrics["test"] =
      split.test.empty() ? Json(nullptr) : report_json(result.test_metrics);
  write_text_file(dir / "metrics.json", metrics.dump(2) + "\n");

  std::string table;
  table += "validation\n";
  table += split.val.empty() ? "(no events)\n"
                             : metrics_table(result.val_metrics);
  table += "\ntest\n";
  table += split.test.empty() ? "(no events)\n"
                              : metrics_table(result.test_metrics);
  write_text_file(dir / "metrics.txt", table);

  save_checkpoint(server.global, (dir / "checkpoint.bin").string());
  return result;
}

SweepSpec parse_sweep_spec(const std::string& text) {
  const Json root = parse_document(text);
  if (!root.is_object()) {
    throw ConfigError("sweep spec must be a JSON object");
  }
  std::vector<std::string> issues;
  check_keys(root, {"parameter", "values", "repetitions"}, "", issues);

  SweepSpec spec;
  spec.parameter = get_string(root, "parameter", "", "parameter", issues);
  if (spec.parameter != "m&k" && spec.parameter != "lambda") {
    complain(issues, "parameter", "must be \"m&k\" or \"lambda\"");
  }
  spec.repetitions = get_count(root, "repetitions", 1, "repetitions", issues);
  if (spec.repetitions < 1) {
    complain(issues, "repetitions", "must be at least 1");
  }

  if (!root.contains("values") || !root.at("values").is_array() ||
      root.at("values").empty()) {
    complain(issues, "values", "must be a non-empty array");
  } else {
    const Json& values = root.at("values");
    for (std::size_t i = 0; i < values.size(); ++i) {
      const std::string path = "values[" + std::to_string(i) + "]";
      const Json& v = values.at(i);
      if (spec.parameter == "lambda") {
        if (!v.is_number()) {
          complain(issues, path, "must be a number");
          continue;
        }
        const double lambda = v.get<double>();
        if (lambda < 0.0 || lambda > 1.0) {
          complain(issues, path, "must lie in [0, 1]");
          continue;
        }
        spec.lambda_values.push_back(lambda);
      } else {
        if (!v.is_object()) {
          complain(issues, path, "must be an object with m and k");
          continue;
        }
        check_keys(v, {"m", "k"}, path, issues);
        const std::size_t m = get_count(v, "m", 0, path + ".m", issues);
        const std::size_t k = get_count(v, "k", 0, path + ".k", issues);
        if (m < 1) {
          complain(issues, path + ".m", "must be at least 1");
        } else if (k < 1 || k > m) {
          complain(issues, path + ".k",
                   "must lie in [1, m] (k=" + std::to_string(k) + ", m=" +
                       std::to_string(m) + ")");
        } else {
          spec.mk_values.emplace_back(m, k);
        }
      }
    }
  }
  if (!issues.empty()) throw_issues(issues);
  return spec;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  return parse_sweep_spec(read_text_file(path));
}

namespace {

std::string trend_csv(const SweepSpec& spec, const SweepResult& result) {
  // loss[m][k][rep] for completed cells only.
  std::map<std::size_t, std::map<std::size_t, std::map<std::size_t, double>>>
      loss;
  std::size_t index = 0;
  for (const auto& [m, k] : spec.mk_values) {
    for (std::size_t r = 0; r < spec.repetitions; ++r, ++index) {
      const SweepCell& cell = result.cells[index];
      if (cell.ok) loss[m][k][r] = cell.final_val_loss;
    }
  }
  std::string out = "m,k_low,k_high,repetitions,larger_k_no_worse\n";
  for (const auto& [m, by_k] : loss) {
    for (auto low = by_k.begin(); low != by_k.end(); ++low) {
      for (auto high = std::next(low); high != by_k.end(); ++high) {
        std::size_t compared = 0;
        std::size_t no_worse = 0;
        for (const auto& [rep, low_loss] : low->second) {
          const auto it = high->second.find(rep);
          if (it == high->second.end()) continue;
          ++compared;
          if (it->second <= low_loss) ++no_worse;
        }
        out += std::to_string(m) + "," + std::to_string(low->first) + "," +
               std::to_string(high->first) + "," + std::to_string(compared) +
               "," + std::to_string(no_worse) + "\n";
      }
    }
  }
  return out;
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, const ExperimentConfig& base) {
  struct Variant {
    std::string tag;
    std::size_t m = 0;
    std::size_t k = 0;
    double lambda = 0.0;
  };
  std::vector<Variant> variants;
  if (spec.parameter == "m&k") {
    for (const auto& [m, k] : spec.mk_values) {
      variants.push_back(
          {"m" + std::to_string(m) + "_k" + std::to_string(k), m, k, 0.0});
    }
  } else if (spec.parameter == "lambda") {
    for (double lambda : spec.lambda_values) {
      variants.push_back({"lambda_" + short_double(lambda), 0, 0, lambda});
    }
  } else {
    throw ConfigError("unknown sweep parameter \"" + spec.parameter + "\"");
  }

  const std::filesystem::path root(base.output_dir);
  std::filesystem::create_directories(root);

  SweepResult result;
  std::string combined = "value,repetition,round,val_loss\n";
  std::string summary = "value,repetition,final_val_loss,final_val_accuracy\n";
  for (const Variant& variant : variants) {
    for (std::size_t r = 0; r < spec.repetitions; ++r) {
      ExperimentConfig cell_cfg = base;
      if (spec.parameter == "m&k") {
        cell_cfg.federated.clients = variant.m;
        cell_cfg.federated.sampled = variant.k;
      } else {
        cell_cfg.federated.lambda = variant.lambda;
      }
      cell_cfg.seed = derive_seed(base.seed, {kSweepStream, r});
      cell_cfg.federated.seed = cell_cfg.seed;
      cell_cfg.output_dir =
          (root / variant.tag / ("rep" + std::to_string(r))).string();

      SweepCell cell;
      cell.value_tag = variant.tag;
      cell.repetition = r;
      cell.directory = cell_cfg.output_dir;
      try {
        const ExperimentResult res = run_experiment(cell_cfg);
        cell.ok = true;
        double last_val = std::nan("");
        for (const RoundRecord& rec : res.history) {
          if (!rec.val_loss.has_value()) continue;
          combined += variant.tag + "," + std::to_string(r) + "," +
                      std::to_string(rec.round) + "," +
                      format_double(*rec.val_loss) + "\n";
          last_val = *rec.val_loss;
        }
        cell.final_val_loss = last_val;
        cell.final_val_accuracy = res.val_metrics.accuracy;
        summary += variant.tag + "," + std::to_string(r) + "," +
                   format_double(cell.final_val_loss) + "," +
                   format_double(cell.final_val_accuracy) + "\n";
      } catch (const std::exception& e) {
        cell.error = e.what();
        result.failed += 1;
        log::warn("sweep cell " + variant.tag + " rep " + std::to_string(r) +
                  " failed: " + cell.error);
      }
      result.cells.push_back(std::move(cell));
    }
  }

  write_text_file(root / "combined.csv", combined);
  write_text_file(root / "summary.csv", summary);
  if (spec.parameter == "m&k") {
    write_text_file(root / "trend.csv", trend_csv(spec, result));
  }

  Json manifest;
  manifest["parameter"] = spec.parameter;
  manifest["repetitions"] = spec.repetitions;
  manifest["failed"] = result.failed;
  manifest["cells"] = Json::array();
  for (const SweepCell& cell : result.cells) {
    Json entry;
    entry["value"] = cell.value_tag;
    entry["repetition"] = cell.repetition;
    entry["directory"] = cell.directory;
    entry["ok"] = cell.ok;
    entry["error"] = cell.error;
    manifest["cells"].push_back(entry);
  }
  write_text_file(root / "sweep.json", manifest.dump(2) + "\n");
  return result;
}

}  // namespace fedgat
