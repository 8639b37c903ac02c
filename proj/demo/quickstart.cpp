// Minimal library walkthrough: build a synthetic corpus, sample a 5-shot
// support set, train with the combined objective, evaluate, and inspect the
// anchor/prototype geometry of one sentence.

#include <cstdio>

#include "wprocer/wprocer.hpp"

int main() {
  using namespace wprocer;

  SyntheticSpec spec;
  spec.n_train = 120;
  spec.n_test = 60;
  spec.seed = 11;
  const SyntheticCorpus corpus = make_separable_corpus(spec);
  std::printf("train: %zu sentences, %zu entities\n", corpus.train.stats.sentence_count,
              corpus.train.stats.entity_count);

  const SupportSet support = greedy_sample_support(corpus.train, /*k_shot=*/5, /*seed=*/3);
  std::printf("5-shot support: %zu sentences\n", support.sentences.size());

  // train on the whole train split here; swap in `support` for a few-shot run
  SupportSet train_split;
  train_split.sentences = corpus.train.sentences;

  ToyBackend backend(/*vocab_size=*/2048, /*d=*/32, /*seed=*/3);
  TrainConfig cfg;
  cfg.steps = 150;
  cfg.learning_rate = 0.02;
  cfg.tau = 1.0;
  cfg.seed = 3;
  cfg.eval_every = 50;
  Trainer trainer(cfg, corpus.train.catalog, backend);
  const TrainHistory history = trainer.train(train_split, &corpus.test);

  for (const auto& e : history.evals) std::printf("step %4d  micro-F1 %.4f\n", e.step, e.f1);

  // prototype geometry of the first test sentence
  const Sentence& s = corpus.test.sentences.front();
  const TokenEmbeddings emb = encode_tokens(s, backend, cfg.normalize);
  std::vector<int> o_rows;
  for (size_t t = 0; t < s.labels.size(); ++t)
    if (s.labels[t] == "O") o_rows.push_back(static_cast<int>(t));
  if (!o_rows.empty()) {
    Eigen::MatrixXd points(o_rows.size(), emb.H.cols());
    for (size_t r = 0; r < o_rows.size(); ++r) points.row(r) = emb.H.row(o_rows[r]);
    const PrototypeSet protos = kmeans(points, cfg.k, /*seed=*/9);
    const ProtoPartition part = partition_prototypes(protos, trainer.current_anchors(), cfg.alpha);
    for (int t = 0; t < corpus.train.catalog.size(); ++t)
      std::printf("type %-8s positives=%zu negatives=%zu\n", corpus.train.catalog.names[t].c_str(),
                  part.positives[t].size(), part.negatives[t].size());
  }
  return 0;
}
