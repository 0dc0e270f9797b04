#include "fedgat/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "fedgat/errors.hpp"

namespace fedgat {

namespace {

bool is_token_char(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

FeatureMode feature_mode_from_string(std::string_view text) {
  if (text == "tfidf" || text == "tf-idf") return FeatureMode::Tfidf;
  if (text == "raw-tf" || text == "raw_tf") return FeatureMode::RawTf;
  throw ConfigError("unknown feature mode \"" + std::string(text) +
                    "\" (expected tfidf or raw-tf)");
}

std::string_view feature_mode_to_string(FeatureMode mode) {
  return mode == FeatureMode::Tfidf ? "tfidf" : "raw-tf";
}

int Vocabulary::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : static_cast<int>(it->second);
}

const std::string& Vocabulary::token_at(std::size_t index) const {
  return tokens_.at(index);
}

std::size_t Vocabulary::doc_frequency(std::size_t index) const {
  return doc_freq_.at(index);
}

Vocabulary build_vocabulary(
    const std::vector<std::vector<std::string>>& documents, std::size_t size) {
  std::unordered_map<std::string, std::size_t> df;
  std::vector<std::string> seen;
  for (const auto& doc : documents) {
    seen.clear();
    for (const auto& token : doc) {
      if (std::find(seen.begin(), seen.end(), token) == seen.end()) {
        seen.push_back(token);
        ++df[token];
      }
    }
  }
  if (df.empty()) {
    throw DatasetError("cannot build a vocabulary from an empty corpus");
  }

  std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > size) ranked.resize(size);

  Vocabulary vocab;
  vocab.tokens_.reserve(ranked.size());
  vocab.doc_freq_.reserve(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    vocab.index_.emplace(ranked[i].first, i);
    vocab.tokens_.push_back(std::move(ranked[i].first));
    vocab.doc_freq_.push_back(ranked[i].second);
  }
  return vocab;
}

std::vector<double> vectorize(const std::vector<std::string>& post,
                              const Vocabulary& vocab, const CorpusStats& stats,
                              FeatureMode mode) {
  std::vector<double> out(vocab.size(), 0.0);
  for (const auto& token : post) {
    const int idx = vocab.index_of(token);
    if (idx >= 0) out[static_cast<std::size_t>(idx)] += 1.0;
  }
  if (mode == FeatureMode::Tfidf) {
    const double n = static_cast<double>(stats.document_count);
    for (std::size_t j = 0; j < out.size(); ++j) {
      if (out[j] == 0.0) continue;
      const double df = static_cast<double>(vocab.doc_frequency(j));
      out[j] *= std::log((1.0 + n) / (1.0 + df));
    }
  }
  return out;
}

}  // namespace fedgat
