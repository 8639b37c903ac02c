#pragma once

#include <string>
#include <vector>

#include "wprocer/common.hpp"
#include "wprocer/corpus.hpp"

namespace wprocer {

struct SyntheticSpec {
  int n_types = 3;
  int n_train = 200;
  int n_test = 100;
  int entity_vocab_per_type = 3;  // small so masked entities still share surface forms
  int filler_vocab = 20;
  int min_len = 6;
  int max_len = 12;
  int max_entities_per_sentence = 2;
  int max_entity_len = 3;
  uint64_t seed = 1;
};

struct SyntheticCorpus {
  Dataset train;
  Dataset test;
};

/// Separable toy corpus: each type draws its entity tokens from its own
/// sub-vocabulary, disjoint from every other type and from the filler words.
/// Descriptions of neighbouring types deliberately share most of their words,
/// so the type anchors start out confusable.
inline SyntheticCorpus make_separable_corpus(const SyntheticSpec& spec) {
  if (spec.n_types < 1 || spec.n_train < 1 || spec.n_test < 1)
    throw ValidationError("make_separable_corpus: counts must be >= 1");

  static const char* kTypeNames[] = {"Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta"};
  TypeCatalog catalog;
  for (int t = 0; t < spec.n_types; ++t) {
    const std::string name = t < 6 ? kTypeNames[t] : "Type" + std::to_string(t);
    catalog.names.push_back(name);
    catalog.descriptions.push_back("synthetic clinical entity category variant " + std::to_string(t) +
                                   " of kind " + name);
  }

  std::vector<std::vector<std::string>> entity_vocab(spec.n_types);
  for (int t = 0; t < spec.n_types; ++t)
    for (int w = 0; w < spec.entity_vocab_per_type; ++w)
      entity_vocab[t].push_back("ent" + std::to_string(t) + "x" + std::to_string(w));
  std::vector<std::string> filler;
  for (int w = 0; w < spec.filler_vocab; ++w) filler.push_back("w" + std::to_string(w));

  auto make_split = [&](int count, uint64_t salt, const std::string& prefix) {
    Rng rng(derive_seed(spec.seed, salt));
    std::vector<Sentence> sentences;
    for (int i = 0; i < count; ++i) {
      Sentence s;
      s.id = prefix + std::to_string(i);
      const int len = spec.min_len + static_cast<int>(rng.below(spec.max_len - spec.min_len + 1));
      s.tokens.assign(len, "");
      s.labels.assign(len, "O");
      for (int p = 0; p < len; ++p) s.tokens[p] = filler[rng.below(filler.size())];

      const int n_entities = 1 + static_cast<int>(rng.below(spec.max_entities_per_sentence));
      for (int e = 0; e < n_entities; ++e) {
        const int type = static_cast<int>(rng.below(spec.n_types));
        const int elen = 1 + static_cast<int>(rng.below(std::min(spec.max_entity_len, len)));
        const int start = static_cast<int>(rng.below(len - elen + 1));
        bool free = true;
        for (int p = start; p < start + elen && free; ++p) free = (s.labels[p] == "O");
        if (start > 0 && s.labels[start - 1] != "O") free = false;
        if (start + elen < len && s.labels[start + elen] != "O") free = false;
        if (!free) continue;
        for (int p = start; p < start + elen; ++p) {
          s.tokens[p] = entity_vocab[type][rng.below(entity_vocab[type].size())];
          s.labels[p] = "I-" + catalog.names[type];
        }
      }
      sentences.push_back(std::move(s));
    }
    // every type must occur at least once so greedy sampling is well-posed
    for (int t = 0; t < spec.n_types; ++t) {
      bool seen = false;
      for (const auto& s : sentences)
        for (const auto& tag : s.labels)
          if (tag == "I-" + catalog.names[t]) seen = true;
      if (!seen && !sentences.empty()) {
        auto& s = sentences[t % sentences.size()];
        s.tokens[0] = entity_vocab[t][0];
        s.labels[0] = "I-" + catalog.names[t];
      }
    }
    Dataset ds;
    ds.catalog = catalog;
    ds.sentences = std::move(sentences);
    ds.stats = compute_stats(ds.sentences, catalog);
    return ds;
  };

  SyntheticCorpus corpus;
  corpus.train = make_split(spec.n_train, 0x7a11, "train");
  corpus.test = make_split(spec.n_test, 0x7e57, "test");
  return corpus;
}

}  // namespace wprocer
