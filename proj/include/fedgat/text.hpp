#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fedgat {

// Lowercased alphanumeric runs; punctuation and whitespace separate tokens.
// Bytes outside ASCII are kept so multi-byte characters survive intact.
std::vector<std::string> tokenize(std::string_view text);

enum class FeatureMode { Tfidf, RawTf };

FeatureMode feature_mode_from_string(std::string_view text);
std::string_view feature_mode_to_string(FeatureMode mode);

struct CorpusStats {
  // Number of documents (posts) the vocabulary was built from.
  std::size_t document_count = 0;
};

class Vocabulary {
 public:
  std::size_t size() const { return tokens_.size(); }
  // -1 when the token is absent.
  int index_of(const std::string& token) const;
  const std::string& token_at(std::size_t index) const;
  std::size_t doc_frequency(std::size_t index) const;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> doc_freq_;
  std::unordered_map<std::string, std::size_t> index_;

  friend Vocabulary build_vocabulary(
      const std::vector<std::vector<std::string>>& documents,
      std::size_t size);
};

// Keeps the `size` tokens with the highest document frequency; ties go to the
// lexicographically smaller token. Throws when no document has any token.
Vocabulary build_vocabulary(
    const std::vector<std::vector<std::string>>& documents, std::size_t size);

// One entry per vocabulary token. Tfidf: tf * ln((1+N)/(1+df)); RawTf: tf.
// Out-of-vocabulary tokens are dropped.
std::vector<double> vectorize(const std::vector<std::string>& post,
                              const Vocabulary& vocab, const CorpusStats& stats,
                              FeatureMode mode);

}  // namespace fedgat
