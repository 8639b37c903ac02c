#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <sstream>

#include "helpers/scalar_oracle.hpp"
#include "wprocer/corpus.hpp"
#include "wprocer/synthetic.hpp"

using namespace wprocer;

namespace {

TypeCatalog two_type_catalog() {
  TypeCatalog c;
  c.names = {"Dis", "Chem"};
  c.descriptions = {"disease or syndrome", "chemical or drug"};
  return c;
}

// independent line-scanning counter, the stats oracle
struct ScannedStats {
  size_t sentences = 0;
  size_t entities = 0;
  std::map<std::string, size_t> per_type;
};

ScannedStats scan_conll(const std::string& text) {
  ScannedStats stats;
  std::istringstream in(text);
  std::string line, prev_tag = "O";
  bool in_sentence = false;
  while (std::getline(in, line)) {
    if (line.empty()) {
      if (in_sentence) ++stats.sentences;
      in_sentence = false;
      prev_tag = "O";
      continue;
    }
    in_sentence = true;
    const std::string tag = line.substr(line.find('\t') + 1);
    if (tag != "O") {
      const bool starts = tag[0] == 'B' || ("I" + tag.substr(1)) != prev_tag;
      if (starts) {
        ++stats.entities;
        ++stats.per_type[tag.substr(2)];
      }
    }
    prev_tag = tag == "O" ? "O" : "I" + tag.substr(1);
  }
  if (in_sentence) ++stats.sentences;
  return stats;
}

}  // namespace

TEST_CASE("to_io_scheme rewrites B prefixes") {
  CHECK(to_io_scheme({"B-Chem", "I-Chem", "O"}) == std::vector<std::string>{"I-Chem", "I-Chem", "O"});
  CHECK(to_io_scheme({"O", "O"}) == std::vector<std::string>{"O", "O"});
}

TEST_CASE("to_io_scheme matches a per-tag rewrite on random BIO sequences and is idempotent") {
  Rng rng(101);
  const std::vector<std::string> alphabet = {"O", "B-Dis", "I-Dis", "B-Chem", "I-Chem"};
  for (int it = 0; it < 200; ++it) {
    std::vector<std::string> tags;
    const size_t len = 1 + rng.below(8);
    for (size_t i = 0; i < len; ++i) tags.push_back(alphabet[rng.below(alphabet.size())]);
    std::vector<std::string> expected;
    for (const auto& t : tags) expected.push_back(t[0] == 'B' ? "I" + t.substr(1) : t);
    const auto once = to_io_scheme(tags);
    CHECK(once == expected);
    CHECK(to_io_scheme(once) == once);
  }
}

TEST_CASE("parse_conll normalizes BIO and assigns stable ids") {
  const std::string text = "a\tB-Dis\nb\tI-Dis\nc\tO\n\nx\tB-Chem\ny\tO\n";
  const Dataset ds = parse_conll(text, two_type_catalog());
  REQUIRE(ds.sentences.size() == 2);
  CHECK(ds.sentences[0].labels == std::vector<std::string>{"I-Dis", "I-Dis", "O"});
  CHECK(ds.sentences[1].labels == std::vector<std::string>{"I-Chem", "O"});
  CHECK(ds.sentences[0].id == "s0");
  CHECK(ds.stats.sentence_count == 2);
  CHECK(ds.stats.entity_count == 2);
}

TEST_CASE("parse_conll on empty text yields an empty dataset") {
  const Dataset ds = parse_conll("", two_type_catalog());
  CHECK(ds.sentences.empty());
  CHECK(ds.stats.sentence_count == 0);
  CHECK(ds.stats.entity_count == 0);
}

TEST_CASE("parse_conll errors carry line numbers and catalog context") {
  CHECK_THROWS_AS(parse_conll("a no-tab-here\n", two_type_catalog()), ParseError);
  CHECK_THROWS_AS(parse_conll("a\tI-Gene\n", two_type_catalog()), CatalogError);
  CHECK_THROWS_AS(parse_conll("a\tX-Dis\n", two_type_catalog()), ParseError);
  try {
    parse_conll("a\tO\nb\tbroken line\n", two_type_catalog());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("dataset stats equal an independent line-scanning count") {
  const SyntheticCorpus corpus = make_separable_corpus({});
  const std::string text = to_conll(corpus.train);
  const ScannedStats scanned = scan_conll(text);
  const Dataset ds = parse_conll(text, corpus.train.catalog);
  CHECK(ds.stats.sentence_count == scanned.sentences);
  CHECK(ds.stats.entity_count == scanned.entities);
  for (const auto& [type, count] : scanned.per_type) CHECK(ds.stats.per_type.at(type) == count);
}

TEST_CASE("dataset round-trips through CoNLL text") {
  SyntheticSpec spec;
  spec.n_train = 40;
  spec.n_test = 1;
  const SyntheticCorpus corpus = make_separable_corpus(spec);
  Dataset original = corpus.train;
  // ids are positional; re-label to match the parse convention
  for (size_t i = 0; i < original.sentences.size(); ++i) original.sentences[i].id = "s" + std::to_string(i);
  original.stats = compute_stats(original.sentences, original.catalog);
  const Dataset reparsed = parse_conll(to_conll(original), original.catalog);
  CHECK(reparsed == original);
}

TEST_CASE("catalog_stats counts maximal same-type runs") {
  Sentence s;
  s.tokens = {"a", "b", "c", "d", "e"};
  s.labels = {"O", "I-Dis", "I-Dis", "O", "I-Dis"};
  s.id = "s0";
  Dataset ds;
  ds.catalog = two_type_catalog();
  ds.sentences = {s};
  const DatasetStats stats = catalog_stats(ds);
  CHECK(stats.sentence_count == 1);
  CHECK(stats.entity_count == 2);
  CHECK(stats.per_type.at("Dis") == 2);
  CHECK(stats.per_type.at("Chem") == 0);
}

TEST_CASE("published corpus profiles carry the reported statistics") {
  const auto& profiles = known_corpus_profiles();
  REQUIRE(profiles.size() == 3);
  CHECK(profiles[0].name == "ncbi");
  CHECK(profiles[0].entity_types == 4);
  CHECK(profiles[0].sentences == 7287);
  CHECK(profiles[0].entities == 7025);
  CHECK(profiles[1].name == "bc5cdr");
  CHECK(profiles[1].sentences == 13938);
  CHECK(profiles[2].name == "i2b2-14");
  CHECK(profiles[2].entity_types == 23);
}

TEST_CASE("greedy sampling covers every type k times and is deterministic") {
  SyntheticSpec spec;
  spec.n_train = 20;
  spec.n_test = 1;
  spec.seed = 5;
  const Dataset ds = make_separable_corpus(spec).train;

  for (int k_shot : {1, 3}) {
    const SupportSet support = greedy_sample_support(ds, k_shot, 17);
    std::map<std::string, int> counts;
    for (const auto& s : support.sentences)
      for (const auto& span : extract_entities(s.labels)) ++counts[span.type];
    for (const auto& name : ds.catalog.names) {
      INFO("type " << name << " k_shot " << k_shot);
      CHECK(counts[name] >= k_shot);
    }
  }

  const SupportSet a = greedy_sample_support(ds, 2, 99);
  const SupportSet b = greedy_sample_support(ds, 2, 99);
  REQUIRE(a.sentences.size() == b.sentences.size());
  for (size_t i = 0; i < a.sentences.size(); ++i) CHECK(a.sentences[i] == b.sentences[i]);
}

TEST_CASE("one sentence holding every type can satisfy the constraints alone") {
  TypeCatalog catalog = two_type_catalog();
  Sentence rich;
  rich.tokens = {"a", "b", "c", "d"};
  rich.labels = {"I-Dis", "O", "I-Chem", "O"};
  rich.id = "s0";
  Sentence poor;
  poor.tokens = {"x"};
  poor.labels = {"O"};
  poor.id = "s1";
  Dataset ds;
  ds.catalog = catalog;
  ds.sentences = {rich, poor};
  ds.stats = compute_stats(ds.sentences, catalog);
  const SupportSet support = greedy_sample_support(ds, 1, 4);
  CHECK(support.sentences.size() == 1);
  CHECK(support.sentences[0].id == "s0");
}

TEST_CASE("greedy sampling names the missing type") {
  TypeCatalog catalog = two_type_catalog();
  Sentence s;
  s.tokens = {"a"};
  s.labels = {"I-Dis"};
  s.id = "s0";
  Dataset ds;
  ds.catalog = catalog;
  ds.sentences = {s};
  ds.stats = compute_stats(ds.sentences, catalog);
  try {
    greedy_sample_support(ds, 1, 0);
    FAIL("expected SamplingError");
  } catch (const SamplingError& e) {
    CHECK(std::string(e.what()).find("Chem") != std::string::npos);
  }
}

TEST_CASE("mask strategy keeps exactly keep_per_type entities") {
  TypeCatalog catalog = two_type_catalog();
  SupportSet support;
  support.k_shot = 5;
  for (int i = 0; i < 5; ++i) {
    Sentence s;
    s.tokens = {"tok", "tok", "tok"};
    s.labels = {"I-Dis", "O", "O"};
    s.id = "m" + std::to_string(i);
    support.sentences.push_back(s);
  }
  const SupportSet masked = apply_mask_strategy(support, 2, 7);
  int remaining = 0;
  for (const auto& s : masked.sentences) remaining += static_cast<int>(extract_entities(s.labels).size());
  CHECK(remaining == 2);
  CHECK(masked.mask_keep == 2);

  // keep >= count is a no-op on labels
  const SupportSet untouched = apply_mask_strategy(support, 10, 7);
  for (size_t i = 0; i < support.sentences.size(); ++i)
    CHECK(untouched.sentences[i].labels == support.sentences[i].labels);

  // keep 0 masks everything
  const SupportSet empty = apply_mask_strategy(support, 0, 7);
  for (const auto& s : empty.sentences)
    for (const auto& tag : s.labels) CHECK(tag == "O");
}

TEST_CASE("mask strategy only grows the O set and never touches tokens") {
  SyntheticSpec spec;
  spec.n_train = 30;
  spec.n_test = 1;
  const Dataset ds = make_separable_corpus(spec).train;
  const SupportSet support = greedy_sample_support(ds, 4, 3);
  const SupportSet masked = apply_mask_strategy(support, 1, 11);
  REQUIRE(masked.sentences.size() == support.sentences.size());
  for (size_t i = 0; i < support.sentences.size(); ++i) {
    CHECK(masked.sentences[i].tokens == support.sentences[i].tokens);
    REQUIRE(masked.sentences[i].labels.size() == support.sentences[i].labels.size());
    for (size_t t = 0; t < support.sentences[i].labels.size(); ++t) {
      if (support.sentences[i].labels[t] == "O") CHECK(masked.sentences[i].labels[t] == "O");
      if (masked.sentences[i].labels[t] != "O")
        CHECK(masked.sentences[i].labels[t] == support.sentences[i].labels[t]);
    }
  }
}

TEST_CASE("support sets round-trip through JSONL") {
  SyntheticSpec spec;
  spec.n_train = 15;
  spec.n_test = 1;
  const Dataset ds = make_separable_corpus(spec).train;
  const SupportSet support = greedy_sample_support(ds, 2, 21);
  std::stringstream buf;
  write_support_jsonl(support, buf);
  const SupportSet back = read_support_jsonl(buf);
  REQUIRE(back.sentences.size() == support.sentences.size());
  for (size_t i = 0; i < support.sentences.size(); ++i) CHECK(back.sentences[i] == support.sentences[i]);
  CHECK(back.k_shot == support.k_shot);
  CHECK(back.seed == support.seed);
  CHECK(back.mask_keep == -1);
}
