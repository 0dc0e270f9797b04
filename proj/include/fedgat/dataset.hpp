#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fedgat {

enum class Label : int { NR = 0, FR = 1, TR = 2, UR = 3 };
inline constexpr std::size_t kLabelCount = 4;

// Accepts the long dataset spellings ("non-rumor", "false", "true",
// "unverified") and the short codes, case-insensitively. Throws on anything
// else.
Label label_from_string(std::string_view text);
std::string_view label_to_string(Label label);

struct Post {
  std::string id;
  std::vector<std::string> tokens;
};

struct RawEvent {
  std::string event_id;
  Label label = Label::NR;
  // Post order defines node indices downstream.
  std::vector<Post> posts;
  // parent post id -> child post id
  std::vector<std::pair<std::string, std::string>> edges;
  // Which configured dataset this event came from; assigned by the loader.
  std::size_t source = 0;
};

// Checks the propagation-tree shape: every edge endpoint exists, every
// non-root post has exactly one parent, exactly one root, and every post is
// reachable from it. Returns an empty string when valid, otherwise a
// human-readable reason.
std::string check_event(const RawEvent& event);

struct LoadStats {
  std::size_t events_loaded = 0;
  std::size_t missing_tree_files = 0;
  std::size_t invalid_trees = 0;
  std::size_t malformed_lines = 0;
};

// Reads the published propagation-tree layout: `label_file` has one
// `label:event_id` line per event and `tree_dir/<event_id>.txt` holds
// `['uid', 'tid', 'delay']->['uid', 'tid', 'delay']` edges, with a ROOT
// pseudo-parent marking the source post. A `source_tweets.txt` file next to
// the label file (id<TAB>text lines) supplies post text where present; a
// middle field of the form `idx:count ...` is expanded into index tokens;
// otherwise the post has no tokens. Events with a missing tree file or a
// malformed tree are skipped with a logged warning.
std::vector<RawEvent> load_raw_dataset(const std::string& tree_dir,
                                       const std::string& label_file,
                                       LoadStats* stats = nullptr);

// One JSON object per line: event_id, label, posts (id + tokens), edges.
void write_events_jsonl(const std::vector<RawEvent>& events,
                        const std::string& path);
std::vector<RawEvent> read_events_jsonl(const std::string& path);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Stratified by label via largest-remainder apportionment; deterministic
// under the seed. Ratios must be positive-or-zero and sum to 1. Throws when
// some class has fewer events than there are nonzero ratios.
SplitIndices split_dataset(const std::vector<RawEvent>& events,
                           const std::array<double, 3>& ratios,
                           std::uint64_t seed);

enum class PartitionStrategy { Iid, ByDataset };

PartitionStrategy partition_strategy_from_string(std::string_view text);
std::string_view partition_strategy_to_string(PartitionStrategy strategy);

struct ClientPartition {
  std::size_t client_id = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Iid: label-stratified shuffled round-robin over each split. ByDataset: one
// client per event source, in source order (m must equal the source count).
// Client train shards are disjoint and cover the train split; likewise val.
std::vector<ClientPartition> partition_clients(
    const std::vector<RawEvent>& events, const SplitIndices& split,
    std::size_t m, PartitionStrategy strategy, std::uint64_t seed);

}  // namespace fedgat
