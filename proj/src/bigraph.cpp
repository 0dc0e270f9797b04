#include "fedgat/bigraph.hpp"

#include <unordered_map>

#include "fedgat/errors.hpp"

namespace fedgat {

BiGraph build_bigraph(const RawEvent& event, const Vocabulary& vocab,
                      const CorpusStats& stats, FeatureMode mode) {
  if (const std::string problem = check_event(event); !problem.empty()) {
    throw DatasetError("event " + event.event_id + ": " + problem);
  }

  const std::size_t n = event.posts.size();
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(n);
  std::vector<double> features;
  features.reserve(n * vocab.size());
  for (std::size_t i = 0; i < n; ++i) {
    index.emplace(event.posts[i].id, i);
    const auto row = vectorize(event.posts[i].tokens, vocab, stats, mode);
    features.insert(features.end(), row.begin(), row.end());
  }

  BiGraph graph;
  graph.features = Tensor({n, vocab.size()}, std::move(features));
  graph.label = static_cast<int>(event.label);
  graph.td_edges.reserve(event.edges.size());
  graph.bu_edges.reserve(event.edges.size());
  std::vector<bool> has_parent(n, false);
  for (const auto& [parent, child] : event.edges) {
    const std::size_t p = index.at(parent);
    const std::size_t c = index.at(child);
    graph.td_edges.emplace_back(p, c);
    graph.bu_edges.emplace_back(c, p);
    has_parent[c] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!has_parent[i]) {
      graph.root = i;
      break;
    }
  }
  return graph;
}

}  // namespace fedgat
