#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "wprocer/common.hpp"

namespace wprocer {

/// Token sequence with gold IO labels. Labels are "O" or "I-<type>".
struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;
  std::string id;

  bool operator==(const Sentence&) const = default;
};

/// Ordered entity types with textual descriptions. The order fixes anchor-row
/// indexing everywhere downstream.
struct TypeCatalog {
  std::vector<std::string> names;
  std::vector<std::string> descriptions;

  int size() const { return static_cast<int>(names.size()); }

  int index_of(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }

  void validate() const {
    if (names.size() != descriptions.size())
      throw ValidationError("catalog: names/descriptions size mismatch");
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i].empty()) throw ValidationError("catalog: empty type name at index " + std::to_string(i));
      if (descriptions[i].empty())
        throw ValidationError("catalog: empty description for type '" + names[i] + "'");
      for (size_t j = i + 1; j < names.size(); ++j)
        if (names[i] == names[j]) throw ValidationError("catalog: duplicate type name '" + names[i] + "'");
    }
  }

  bool operator==(const TypeCatalog&) const = default;
};

struct DatasetStats {
  size_t sentence_count = 0;
  size_t entity_count = 0;
  std::map<std::string, size_t> per_type;

  bool operator==(const DatasetStats&) const = default;
};

struct Dataset {
  std::vector<Sentence> sentences;
  TypeCatalog catalog;
  DatasetStats stats;

  bool operator==(const Dataset&) const = default;
};

struct SupportSet {
  std::vector<Sentence> sentences;
  int k_shot = 0;
  uint64_t seed = 0;
  // mask provenance; keep_per_type < 0 means no mask applied
  int mask_keep = -1;
  uint64_t mask_seed = 0;
};

/// Half-open token span of one entity.
struct EntitySpan {
  size_t begin = 0;
  size_t end = 0;
  std::string type;

  bool operator==(const EntitySpan&) const = default;
  bool operator<(const EntitySpan& o) const {
    return std::tie(begin, end, type) < std::tie(o.begin, o.end, o.type);
  }
};

namespace detail {

inline bool is_io_entity_tag(const std::string& tag) {
  return tag.size() > 2 && (tag[0] == 'I' || tag[0] == 'B') && tag[1] == '-';
}

inline void check_tag_shape(const std::string& tag, const std::string& where) {
  if (tag == "O") return;
  if (!is_io_entity_tag(tag))
    throw ValidationError(where + ": malformed tag '" + tag + "' (expected O, I-<type> or B-<type>)");
}

}  // namespace detail

/// B-X becomes I-X, O stays. Total on well-formed input, idempotent.
inline std::vector<std::string> to_io_scheme(const std::vector<std::string>& labels) {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (const auto& tag : labels) {
    detail::check_tag_shape(tag, "to_io_scheme");
    if (tag.size() > 2 && tag[0] == 'B')
      out.push_back("I" + tag.substr(1));
    else
      out.push_back(tag);
  }
  return out;
}

/// Maximal contiguous runs of identical I-<type> tags, as half-open spans.
/// Under IO, adjacent same-type entities cannot be separated; one run is one entity.
inline std::vector<EntitySpan> extract_entities(const std::vector<std::string>& tags) {
  std::vector<EntitySpan> spans;
  size_t i = 0;
  while (i < tags.size()) {
    detail::check_tag_shape(tags[i], "extract_entities");
    if (tags[i][0] == 'B')
      throw ValidationError("extract_entities: BIO tag '" + tags[i] + "' in IO sequence");
    if (tags[i] == "O") {
      ++i;
      continue;
    }
    const std::string type = tags[i].substr(2);
    size_t j = i + 1;
    while (j < tags.size() && tags[j] == tags[i]) ++j;
    spans.push_back({i, j, type});
    i = j;
  }
  return spans;
}

inline DatasetStats compute_stats(const std::vector<Sentence>& sentences, const TypeCatalog& catalog) {
  DatasetStats stats;
  stats.sentence_count = sentences.size();
  for (const auto& name : catalog.names) stats.per_type[name] = 0;
  for (const auto& s : sentences) {
    for (const auto& span : extract_entities(s.labels)) {
      ++stats.entity_count;
      ++stats.per_type[span.type];
    }
  }
  return stats;
}

/// Sentence count, entity count (maximal I-runs) and per-type counts,
/// recomputed from the sentences.
inline DatasetStats catalog_stats(const Dataset& dataset) {
  return compute_stats(dataset.sentences, dataset.catalog);
}

inline void validate_sentence(const Sentence& s, const TypeCatalog& catalog) {
  if (s.tokens.empty()) throw ValidationError("sentence '" + s.id + "': empty");
  if (s.tokens.size() != s.labels.size())
    throw ValidationError("sentence '" + s.id + "': tokens/labels length mismatch");
  for (const auto& tag : s.labels) {
    if (tag == "O") continue;
    if (!detail::is_io_entity_tag(tag) || tag[0] != 'I')
      throw ValidationError("sentence '" + s.id + "': tag '" + tag + "' is not IO");
    if (catalog.index_of(tag.substr(2)) < 0)
      throw CatalogError("sentence '" + s.id + "': tag type '" + tag.substr(2) + "' not in catalog");
  }
}

/// Parse tab-separated CoNLL text ("<token>\t<tag>", blank line between
/// sentences). BIO tags are accepted and normalized to IO.
inline Dataset parse_conll(const std::string& text, const TypeCatalog& catalog) {
  catalog.validate();
  Dataset ds;
  ds.catalog = catalog;

  std::vector<std::string> tokens, tags;
  size_t line_no = 0;
  auto flush = [&]() {
    if (tokens.empty()) return;
    Sentence s;
    s.tokens = std::move(tokens);
    s.labels = to_io_scheme(tags);
    s.id = "s" + std::to_string(ds.sentences.size());
    validate_sentence(s, catalog);
    ds.sentences.push_back(std::move(s));
    tokens.clear();
    tags.clear();
  };

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected '<token>\\t<tag>', got '" + line + "'");
    const std::string token = line.substr(0, tab);
    const std::string tag = line.substr(tab + 1);
    try {
      detail::check_tag_shape(tag, "line " + std::to_string(line_no));
    } catch (const ValidationError& e) {
      throw ParseError(e.what());
    }
    if (tag != "O" && catalog.index_of(tag.substr(2)) < 0)
      throw CatalogError("line " + std::to_string(line_no) + ": tag type '" + tag.substr(2) +
                         "' not in catalog");
    tokens.push_back(token);
    tags.push_back(tag);
  }
  flush();
  ds.stats = compute_stats(ds.sentences, catalog);
  return ds;
}

inline std::string to_conll(const std::vector<Sentence>& sentences) {
  std::string out;
  for (size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    for (size_t t = 0; t < s.tokens.size(); ++t) {
      out += s.tokens[t];
      out += '\t';
      out += s.labels[t];
      out += '\n';
    }
    if (i + 1 < sentences.size()) out += '\n';
  }
  return out;
}

inline std::string to_conll(const Dataset& dataset) { return to_conll(dataset.sentences); }

/// Greedy support sampling: types visited in ascending corpus frequency,
/// sentences scanned in a seed-shuffled order; adding a sentence updates the
/// counts of every type it contains.
inline SupportSet greedy_sample_support(const Dataset& dataset, int k_shot, uint64_t seed) {
  if (k_shot < 1) throw ValidationError("greedy_sample_support: k_shot must be >= 1");
  const auto& catalog = dataset.catalog;

  std::map<std::string, size_t> corpus_counts;
  for (const auto& name : catalog.names) corpus_counts[name] = 0;
  std::vector<std::vector<size_t>> per_type_counts(dataset.sentences.size());
  for (size_t i = 0; i < dataset.sentences.size(); ++i) {
    per_type_counts[i].assign(catalog.names.size(), 0);
    for (const auto& span : extract_entities(dataset.sentences[i].labels)) {
      const int t = catalog.index_of(span.type);
      ++per_type_counts[i][t];
      ++corpus_counts[span.type];
    }
  }
  for (const auto& [name, count] : corpus_counts)
    if (count == 0) throw SamplingError("greedy_sample_support: type '" + name + "' has no occurrences");

  // ascending frequency, catalog order on ties
  std::vector<int> type_order(catalog.names.size());
  for (size_t i = 0; i < type_order.size(); ++i) type_order[i] = static_cast<int>(i);
  std::stable_sort(type_order.begin(), type_order.end(), [&](int a, int b) {
    return corpus_counts.at(catalog.names[a]) < corpus_counts.at(catalog.names[b]);
  });

  std::vector<size_t> scan_order(dataset.sentences.size());
  for (size_t i = 0; i < scan_order.size(); ++i) scan_order[i] = i;
  Rng rng(derive_seed(seed, 0x5a3c));
  rng.shuffle(scan_order);

  std::vector<bool> taken(dataset.sentences.size(), false);
  std::vector<size_t> support_counts(catalog.names.size(), 0);
  std::vector<size_t> picked;
  for (int t : type_order) {
    for (size_t pos = 0; pos < scan_order.size() && support_counts[t] < static_cast<size_t>(k_shot); ++pos) {
      const size_t idx = scan_order[pos];
      if (taken[idx] || per_type_counts[idx][t] == 0) continue;
      taken[idx] = true;
      picked.push_back(idx);
      for (size_t u = 0; u < support_counts.size(); ++u) support_counts[u] += per_type_counts[idx][u];
    }
  }
  std::sort(picked.begin(), picked.end());

  SupportSet support;
  support.k_shot = k_shot;
  support.seed = seed;
  for (size_t idx : picked) support.sentences.push_back(dataset.sentences[idx]);
  return support;
}

/// Keep min(keep_per_type, count) entities per type (chosen uniformly at
/// random under seed); every other entity token of that type becomes O.
/// Token strings are untouched.
inline SupportSet apply_mask_strategy(const SupportSet& support, int keep_per_type, uint64_t seed) {
  if (keep_per_type < 0) throw ValidationError("apply_mask_strategy: keep_per_type must be >= 0");
  SupportSet out = support;
  out.mask_keep = keep_per_type;
  out.mask_seed = seed;

  // (sentence idx, span) per type, in stable scan order
  std::map<std::string, std::vector<std::pair<size_t, EntitySpan>>> by_type;
  for (size_t i = 0; i < out.sentences.size(); ++i)
    for (const auto& span : extract_entities(out.sentences[i].labels)) by_type[span.type].push_back({i, span});

  for (auto& [type, occurrences] : by_type) {
    const size_t keep = std::min<size_t>(keep_per_type, occurrences.size());
    std::vector<size_t> order(occurrences.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, fnv1a64(type)));
    rng.shuffle(order);
    for (size_t pos = keep; pos < order.size(); ++pos) {
      const auto& [sent_idx, span] = occurrences[order[pos]];
      for (size_t t = span.begin; t < span.end; ++t) out.sentences[sent_idx].labels[t] = "O";
    }
  }
  return out;
}

// --- support set JSONL (one sentence object per line, with provenance) ---

inline void write_support_jsonl(const SupportSet& support, std::ostream& out) {
  for (const auto& s : support.sentences) {
    nlohmann::json j;
    j["id"] = s.id;
    j["tokens"] = s.tokens;
    j["labels"] = s.labels;
    j["k_shot"] = support.k_shot;
    j["seed"] = support.seed;
    j["mask_keep"] = support.mask_keep;
    j["mask_seed"] = support.mask_seed;
    out << j.dump() << '\n';
  }
}

inline std::string support_to_jsonl(const SupportSet& support) {
  std::ostringstream out;
  write_support_jsonl(support, out);
  return out.str();
}

inline SupportSet read_support_jsonl(std::istream& in) {
  SupportSet support;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("support jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
    Sentence s;
    s.id = j.at("id").get<std::string>();
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    s.labels = j.at("labels").get<std::vector<std::string>>();
    support.sentences.push_back(std::move(s));
    support.k_shot = j.value("k_shot", 0);
    support.seed = j.value("seed", uint64_t{0});
    support.mask_keep = j.value("mask_keep", -1);
    support.mask_seed = j.value("mask_seed", uint64_t{0});
  }
  return support;
}

inline SupportSet read_support_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open support file '" + path + "'");
  return read_support_jsonl(in);
}

// --- published corpus statistics used as ingest validation profiles ---

struct CorpusProfile {
  std::string name;
  size_t entity_types;
  size_t sentences;
  size_t entities;
};

inline const std::vector<CorpusProfile>& known_corpus_profiles() {
  static const std::vector<CorpusProfile> profiles = {
      {"ncbi", 4, 7287, 7025},
      {"bc5cdr", 2, 13938, 28545},
      {"i2b2-14", 23, 140817, 29233},
  };
  return profiles;
}

inline void validate_against_profile(const Dataset& dataset, const std::string& profile_name) {
  for (const auto& p : known_corpus_profiles()) {
    if (p.name != profile_name) continue;
    const auto stats = catalog_stats(dataset);
    std::string problems;
    if (dataset.catalog.names.size() != p.entity_types)
      problems += " entity types " + std::to_string(dataset.catalog.names.size()) + " != " +
                  std::to_string(p.entity_types) + ";";
    if (stats.sentence_count != p.sentences)
      problems += " sentences " + std::to_string(stats.sentence_count) + " != " + std::to_string(p.sentences) + ";";
    if (stats.entity_count != p.entities)
      problems += " entities " + std::to_string(stats.entity_count) + " != " + std::to_string(p.entities) + ";";
    if (!problems.empty()) throw ValidationError("profile '" + profile_name + "' mismatch:" + problems);
    return;
  }
  throw ValidationError("unknown corpus profile '" + profile_name + "'");
}

}  // namespace wprocer
