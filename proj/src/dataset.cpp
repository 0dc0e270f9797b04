#include "fedgat/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "fedgat/errors.hpp"
#include "fedgat/log.hpp"
#include "fedgat/rng.hpp"
#include "fedgat/text.hpp"
#include "json.hpp"

namespace fedgat {

namespace {

using nlohmann::json;

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

struct Triple {
  std::string uid;
  std::string tid;
  std::string delay;
};

// ['uid', 'tid', 'delay'] with single or double quotes.
std::optional<Triple> parse_triple(std::string_view text) {
  text = trim(text);
  if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
    return std::nullopt;
  }
  text = text.substr(1, text.size() - 2);
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (pos < text.size() && fields.size() < 3) {
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == ',' || text[pos] == '\t')) {
      ++pos;
    }
    if (pos >= text.size()) break;
    const char quote = text[pos];
    if (quote != '\'' && quote != '"') return std::nullopt;
    const std::size_t end = text.find(quote, pos + 1);
    if (end == std::string_view::npos) return std::nullopt;
    fields.emplace_back(text.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  if (fields.size() != 3) return std::nullopt;
  return Triple{std::move(fields[0]), std::move(fields[1]),
                std::move(fields[2])};
}

bool is_root_marker(const Triple& t) {
  return t.uid == "ROOT" || t.tid == "ROOT";
}

// `idx:count idx:count ...` middle fields carry pre-tokenized content.
bool looks_like_index_list(const std::string& field) {
  return field.find(':') != std::string::npos;
}

std::vector<std::string> tokens_from_index_list(const std::string& field) {
  std::vector<std::string> tokens;
  std::istringstream in(field);
  std::string pair;
  while (in >> pair) {
    const std::size_t colon = pair.find(':');
    if (colon == std::string::npos || colon == 0) continue;
    const std::string idx = pair.substr(0, colon);
    long count = 0;
    try {
      count = std::stol(pair.substr(colon + 1));
    } catch (const std::exception&) {
      continue;
    }
    count = std::min(count, 64L);
    for (long c = 0; c < count; ++c) tokens.push_back("w" + idx);
  }
  return tokens;
}

std::unordered_map<std::string, std::string> load_source_tweets(
    const std::filesystem::path& label_file) {
  std::unordered_map<std::string, std::string> texts;
  const auto path = label_file.parent_path() / "source_tweets.txt";
  std::ifstream in(path);
  if (!in) return texts;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) continue;
    texts[line.substr(0, tab)] = line.substr(tab + 1);
  }
  if (!texts.empty()) {
    log::info("loaded " + std::to_string(texts.size()) + " source texts from " +
              path.string());
  }
  return texts;
}

Label label_from_json(const json& j, const std::string& path,
                      std::size_t line_no) {
  if (!j.is_string()) {
    throw DatasetError(path + ":" + std::to_string(line_no) +
                       ": label must be a string");
  }
  return label_from_string(j.get<std::string>());
}

}  // namespace

Label label_from_string(std::string_view text) {
  const std::string t = lowercase(trim(text));
  if (t == "non-rumor" || t == "nonrumor" || t == "nr") return Label::NR;
  if (t == "false" || t == "fr") return Label::FR;
  if (t == "true" || t == "tr") return Label::TR;
  if (t == "unverified" || t == "ur") return Label::UR;
  throw DatasetError("unknown label \"" + std::string(text) + "\"");
}

std::string_view label_to_string(Label label) {
  switch (label) {
    case Label::NR: return "NR";
    case Label::FR: return "FR";
    case Label::TR: return "TR";
    case Label::UR: return "UR";
  }
  throw std::logic_error("unreachable label value");
}

std::string check_event(const RawEvent& event) {
  if (event.posts.empty()) return "event has no posts";
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < event.posts.size(); ++i) {
    if (!index.emplace(event.posts[i].id, i).second) {
      return "duplicate post id \"" + event.posts[i].id + "\"";
    }
  }
  std::vector<int> parent_count(event.posts.size(), 0);
  std::vector<std::vector<std::size_t>> children(event.posts.size());
  for (const auto& [parent, child] : event.edges) {
    const auto pit = index.find(parent);
    const auto cit = index.find(child);
    if (pit == index.end()) return "edge parent \"" + parent + "\" is not a post";
    if (cit == index.end()) return "edge child \"" + child + "\" is not a post";
    if (++parent_count[cit->second] > 1) {
      return "post \"" + child + "\" has more than one parent";
    }
    children[pit->second].push_back(cit->second);
  }
  std::size_t root = event.posts.size();
  for (std::size_t i = 0; i < event.posts.size(); ++i) {
    if (parent_count[i] == 0) {
      if (root != event.posts.size()) return "more than one root post";
      root = i;
    }
  }
  if (root == event.posts.size()) return "no root post (cycle through every post)";

  std::vector<bool> seen(event.posts.size(), false);
  std::vector<std::size_t> queue{root};
  seen[root] = true;
  std::size_t visited = 0;
  while (!queue.empty()) {
    const std::size_t node = queue.back();
    queue.pop_back();
    ++visited;
    for (std::size_t child : children[node]) {
      if (!seen[child]) {
        seen[child] = true;
        queue.push_back(child);
      }
    }
  }
  if (visited != event.posts.size()) {
    return "posts unreachable from the root (cycle or disconnected subtree)";
  }
  return "";
}

std::vector<RawEvent> load_raw_dataset(const std::string& tree_dir,
                                       const std::string& label_file,
                                       LoadStats* stats) {
  std::ifstream labels(label_file);
  if (!labels) {
    throw DatasetError("cannot open label file " + label_file);
  }
  const auto texts = load_source_tweets(label_file);
  LoadStats local;

  std::vector<RawEvent> events;
  std::string line;
  std::size_t label_line_no = 0;
  while (std::getline(labels, line)) {
    ++label_line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos) {
      log::warn(label_file + ":" + std::to_string(label_line_no) +
                ": expected label:event_id, skipping");
      ++local.malformed_lines;
      continue;
    }
    Label label;
    try {
      label = label_from_string(line.substr(0, colon));
    } catch (const DatasetError&) {
      log::warn(label_file + ":" + std::to_string(label_line_no) +
                ": unknown label, skipping");
      ++local.malformed_lines;
      continue;
    }
    const std::string event_id(trim(line.substr(colon + 1)));

    const auto tree_path =
        std::filesystem::path(tree_dir) / (event_id + ".txt");
    std::ifstream tree(tree_path);
    if (!tree) {
      log::warn("missing tree file for event " + event_id + ", skipping");
      ++local.missing_tree_files;
      continue;
    }

    RawEvent event;
    event.event_id = event_id;
    event.label = label;
    std::unordered_map<std::string, std::size_t> post_index;
    auto add_post = [&](const Triple& t) {
      if (post_index.count(t.tid)) return;
      post_index.emplace(t.tid, event.posts.size());
      Post post;
      post.id = t.tid;
      if (auto it = texts.find(t.tid); it != texts.end()) {
        post.tokens = tokenize(it->second);
      } else if (looks_like_index_list(t.tid)) {
        post.tokens = tokens_from_index_list(t.tid);
      }
      event.posts.push_back(std::move(post));
    };

    std::string tree_line;
    std::size_t tree_line_no = 0;
    std::unordered_set<std::string> seen_edges;
    while (std::getline(tree, tree_line)) {
      ++tree_line_no;
      if (!tree_line.empty() && tree_line.back() == '\r') tree_line.pop_back();
      if (trim(tree_line).empty()) continue;
      std::optional<Triple> parent;
      std::optional<Triple> child;
      const std::size_t arrow = tree_line.find("->");
      if (arrow != std::string::npos) {
        parent = parse_triple(std::string_view(tree_line).substr(0, arrow));
        child = parse_triple(std::string_view(tree_line).substr(arrow + 2));
      }
      if (!parent || !child) {
        log::warn(tree_path.string() + ":" + std::to_string(tree_line_no) +
                  ": malformed edge line, skipping");
        ++local.malformed_lines;
        continue;
      }
      if (is_root_marker(*parent)) {
        add_post(*child);
        continue;
      }
      add_post(*parent);
      add_post(*child);
      if (parent->tid != child->tid &&
          seen_edges.insert(parent->tid + "\t" + child->tid).second) {
        event.edges.emplace_back(parent->tid, child->tid);
      }
    }

    if (const std::string problem = check_event(event); !problem.empty()) {
      log::warn("event " + event_id + ": " + problem + ", skipping");
      ++local.invalid_trees;
      continue;
    }
    events.push_back(std::move(event));
    ++local.events_loaded;
  }
  if (local.missing_tree_files > 0) {
    log::warn(std::to_string(local.missing_tree_files) +
              " events skipped for missing tree files");
  }
  if (stats) *stats = local;
  return events;
}

void write_events_jsonl(const std::vector<RawEvent>& events,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot open " + path + " for writing");
  for (const auto& event : events) {
    json posts = json::array();
    for (const auto& post : event.posts) {
      posts.push_back({{"id", post.id}, {"tokens", post.tokens}});
    }
    json edges = json::array();
    for (const auto& [parent, child] : event.edges) {
      edges.push_back(json::array({parent, child}));
    }
    const json record = {{"event_id", event.event_id},
                         {"label", label_to_string(event.label)},
                         {"posts", std::move(posts)},
                         {"edges", std::move(edges)}};
    out << record.dump() << '\n';
  }
  if (!out) throw DatasetError("failed writing " + path);
}

std::vector<RawEvent> read_events_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path);
  std::vector<RawEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DatasetError(path + ":" + std::to_string(line_no) + ": " +
                         e.what());
    }
    auto fail = [&](const std::string& what) -> DatasetError {
      return DatasetError(path + ":" + std::to_string(line_no) + ": " + what);
    };
    if (!record.is_object()) throw fail("expected a JSON object");
    if (!record.contains("event_id") || !record["event_id"].is_string()) {
      throw fail("missing string field event_id");
    }
    if (!record.contains("posts") || !record["posts"].is_array()) {
      throw fail("missing array field posts");
    }
    RawEvent event;
    event.event_id = record["event_id"].get<std::string>();
    event.label = label_from_json(record.value("label", json()), path, line_no);
    for (const auto& p : record["posts"]) {
      if (!p.is_object() || !p.contains("id") || !p["id"].is_string()) {
        throw fail("every post needs a string id");
      }
      Post post;
      post.id = p["id"].get<std::string>();
      for (const auto& t : p.value("tokens", json::array())) {
        if (!t.is_string()) throw fail("post tokens must be strings");
        post.tokens.push_back(t.get<std::string>());
      }
      event.posts.push_back(std::move(post));
    }
    for (const auto& e : record.value("edges", json::array())) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() ||
          !e[1].is_string()) {
        throw fail("every edge must be a [parent, child] id pair");
      }
      event.edges.emplace_back(e[0].get<std::string>(),
                               e[1].get<std::string>());
    }
    if (const std::string problem = check_event(event); !problem.empty()) {
      throw fail("event " + event.event_id + ": " + problem);
    }
    events.push_back(std::move(event));
  }
  return events;
}

SplitIndices split_dataset(const std::vector<RawEvent>& events,
                           const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split ratios must be nonnegative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  std::size_t nonzero = 0;
  for (double r : ratios) nonzero += r > 0.0 ? 1 : 0;
  if (nonzero == 0) throw ConfigError("split ratios are all zero");

  std::array<std::vector<std::size_t>, kLabelCount> by_label;
  for (std::size_t i = 0; i < events.size(); ++i) {
    by_label[static_cast<std::size_t>(events[i].label)].push_back(i);
  }

  SplitIndices out;
  std::array<std::vector<std::size_t>*, 3> splits = {&out.train, &out.val,
                                                     &out.test};
  for (std::size_t cls = 0; cls < kLabelCount; ++cls) {
    auto& members = by_label[cls];
    if (members.empty()) continue;
    if (members.size() < nonzero) {
      throw DatasetError("class " +
                         std::string(label_to_string(static_cast<Label>(cls))) +
                         " has " + std::to_string(members.size()) +
                         " events, fewer than the " + std::to_string(nonzero) +
                         " nonempty splits");
    }
    Rng rng(derive_seed(seed, {1, cls}));
    rng.shuffle(members);

    // Largest-remainder apportionment of this class across the three splits.
    const double n = static_cast<double>(members.size());
    std::array<std::size_t, 3> take{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double exact = ratios[s] * n;
      take[s] = static_cast<std::size_t>(std::floor(exact));
      remainder[s] = exact - std::floor(exact);
      assigned += take[s];
    }
    std::array<std::size_t, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return remainder[a] > remainder[b];
    });
    for (std::size_t i = 0; assigned < members.size(); ++i) {
      ++take[order[i % 3]];
      ++assigned;
    }

    std::size_t cursor = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t i = 0; i < take[s]; ++i) {
        splits[s]->push_back(members[cursor++]);
      }
    }
  }
  for (auto* split : splits) std::sort(split->begin(), split->end());
  return out;
}

PartitionStrategy partition_strategy_from_string(std::string_view text) {
  const std::string t = lowercase(trim(text));
  if (t == "iid") return PartitionStrategy::Iid;
  if (t == "by-dataset" || t == "by_dataset") return PartitionStrategy::ByDataset;
  throw ConfigError("unknown partition strategy \"" + std::string(text) +
                    "\" (expected iid or by-dataset)");
}

std::string_view partition_strategy_to_string(PartitionStrategy strategy) {
  return strategy == PartitionStrategy::Iid ? "iid" : "by-dataset";
}

namespace {

// Deal split members to m clients, stratified by label, continuing the deal
// cursor across labels so client sizes stay within one of each other.
void deal_round_robin(const std::vector<RawEvent>& events,
                      const std::vector<std::size_t>& split_members,
                      std::size_t m, std::uint64_t seed, bool is_train,
                      std::vector<ClientPartition>& partitions) {
  std::array<std::vector<std::size_t>, kLabelCount> by_label;
  for (std::size_t idx : split_members) {
    by_label[static_cast<std::size_t>(events[idx].label)].push_back(idx);
  }
  std::size_t cursor = 0;
  for (std::size_t cls = 0; cls < kLabelCount; ++cls) {
    Rng rng(derive_seed(seed, {2, is_train ? 0u : 1u, cls}));
    rng.shuffle(by_label[cls]);
    for (std::size_t idx : by_label[cls]) {
      auto& shard = is_train ? partitions[cursor % m].train
                             : partitions[cursor % m].val;
      shard.push_back(idx);
      ++cursor;
    }
  }
}

}  // namespace

std::vector<ClientPartition> partition_clients(
    const std::vector<RawEvent>& events, const SplitIndices& split,
    std::size_t m, PartitionStrategy strategy, std::uint64_t seed) {
  if (m < 1) throw ConfigError("client count must be at least 1");
  if (m > split.train.size()) {
    throw ConfigError("client count " + std::to_string(m) +
                      " exceeds the " + std::to_string(split.train.size()) +
                      " training events");
  }
  std::vector<ClientPartition> partitions(m);
  for (std::size_t c = 0; c < m; ++c) partitions[c].client_id = c;

  if (strategy == PartitionStrategy::ByDataset) {
    std::size_t max_source = 0;
    for (const auto& event : events) {
      max_source = std::max(max_source, event.source);
    }
    if (max_source + 1 != m) {
      throw ConfigError("by-dataset partitioning needs one client per source "
                        "dataset: have " +
                        std::to_string(max_source + 1) + " sources but m=" +
                        std::to_string(m));
    }
    for (std::size_t idx : split.train) {
      partitions[events[idx].source].train.push_back(idx);
    }
    for (std::size_t idx : split.val) {
      partitions[events[idx].source].val.push_back(idx);
    }
    for (const auto& p : partitions) {
      if (p.train.empty()) {
        throw ConfigError("source dataset " + std::to_string(p.client_id) +
                          " contributes no training events");
      }
    }
    return partitions;
  }

  deal_round_robin(events, split.train, m, seed, true, partitions);
  deal_round_robin(events, split.val, m, seed, false, partitions);
  for (auto& p : partitions) {
    std::sort(p.train.begin(), p.train.end());
    std::sort(p.val.begin(), p.val.end());
  }
  return partitions;
}

}  // namespace fedgat
