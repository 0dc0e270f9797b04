#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "fedgat/dataset.hpp"
#include "fedgat/tensor.hpp"
#include "fedgat/text.hpp"

namespace fedgat {

// Directed (source, target) index pairs.
using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

// A propagation tree in both orientations. Node i is event.posts[i]; the two
// edge lists are each other's transposes and share one feature matrix.
struct BiGraph {
  Tensor features;        // node count x vocabulary size
  EdgeList td_edges;      // parent -> child
  EdgeList bu_edges;      // child -> parent
  int label = 0;
  std::size_t root = 0;
};

// Throws when the event violates the tree invariants, naming the event id.
BiGraph build_bigraph(const RawEvent& event, const Vocabulary& vocab,
                      const CorpusStats& stats, FeatureMode mode);

}  // namespace fedgat
