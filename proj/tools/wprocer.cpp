// Command-line surface for the weighted prototypical contrastive NER pipeline:
// ingest, sample, mask, train, ablate, sweep, eval, visualize.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wprocer/wprocer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wprocer;

namespace {

std::string resolve_data_path(const std::string& path) {
  if (fs::exists(path)) return path;
  if (const char* base = std::getenv("WPROCER_DATA_DIR")) {
    const fs::path joined = fs::path(base) / path;
    if (fs::exists(joined)) return joined.string();
  }
  return path;
}

std::string read_file(const std::string& path) {
  const std::string resolved = resolve_data_path(path);
  std::ifstream in(resolved, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
}

TypeCatalog load_catalog(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("catalog '" + path + "': " + e.what());
  }
  TypeCatalog catalog;
  for (const auto& entry : j) {
    catalog.names.push_back(entry.at("name").get<std::string>());
    catalog.descriptions.push_back(entry.at("description").get<std::string>());
  }
  catalog.validate();
  return catalog;
}

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

struct TrainArgs {
  std::string config_path;
  std::string support_path;
  std::string types_path;
  std::string eval_path;
  std::string out = ".";
  int mask = -1;
  uint64_t mask_seed_flag = 0;
  std::string ablation_flag;
  std::string type_desc_flag;
  // flag overrides, applied over the config file
  TrainConfig overrides;
  CLI::App* cmd = nullptr;
};

void add_train_flags(CLI::App* cmd, TrainArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file (backend + train sections)");
  cmd->add_option("--support", args.support_path, "support set JSONL")->required();
  cmd->add_option("--types", args.types_path, "type catalog JSON")->required();
  cmd->add_option("--eval", args.eval_path, "CoNLL data to evaluate on during/after training");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--seed", args.overrides.seed, "training seed");
  cmd->add_option("--k", args.overrides.k, "prototype cluster count");
  cmd->add_option("--alpha", args.overrides.alpha, "positive/negative distance threshold");
  cmd->add_option("--beta", args.overrides.beta, "type-loss weight in the total objective");
  cmd->add_option("--tau", args.overrides.tau, "contrastive temperature");
  cmd->add_option("--steps", args.overrides.steps, "training steps");
  cmd->add_option("--lr", args.overrides.learning_rate, "learning rate");
  cmd->add_option("--batch-size", args.overrides.batch_size, "sentences per batch");
  cmd->add_option("--mask", args.mask, "keep N entities per type, relabel the rest O (Mask-N)");
  cmd->add_option("--mask-seed", args.mask_seed_flag, "seed for mask selection (defaults to --seed)");
  cmd->add_option("--ablation", args.ablation_flag, "ablation mode: full|no_weight|no_prototype|ce_only");
  cmd->add_option("--type-desc", args.type_desc_flag,
                  "anchor input: description|surface_name|prototypical_instances");
}

struct LoadedSetup {
  TypeCatalog catalog;
  SupportSet support;
  std::unique_ptr<EncoderBackend> backend;
  TrainConfig cfg;
  json backend_cfg;
  json effective;
  std::unique_ptr<Dataset> eval_data;
};

LoadedSetup prepare_train_setup(const TrainArgs& args) {
  LoadedSetup setup;
  setup.catalog = load_catalog(args.types_path);

  json file_cfg = json::object();
  if (!args.config_path.empty()) {
    try {
      file_cfg = json::parse(read_file(args.config_path));
    } catch (const json::exception& e) {
      throw ParseError("config '" + args.config_path + "': " + e.what());
    }
  }
  setup.cfg = TrainConfig::from_json(file_cfg.value("train", json::object()));

  // flags override file values
  const CLI::App* cmd = args.cmd;
  auto touched = [&](const std::string& flag) { return cmd && cmd->count(flag) > 0; };
  if (touched("--seed")) setup.cfg.seed = args.overrides.seed;
  if (touched("--k")) setup.cfg.k = args.overrides.k;
  if (touched("--alpha")) setup.cfg.alpha = args.overrides.alpha;
  if (touched("--beta")) setup.cfg.beta = args.overrides.beta;
  if (touched("--tau")) setup.cfg.tau = args.overrides.tau;
  if (touched("--steps")) setup.cfg.steps = args.overrides.steps;
  if (touched("--lr")) setup.cfg.learning_rate = args.overrides.learning_rate;
  if (touched("--batch-size")) setup.cfg.batch_size = args.overrides.batch_size;
  if (!args.ablation_flag.empty()) setup.cfg.ablation = parse_ablation_mode(args.ablation_flag);
  if (!args.type_desc_flag.empty()) setup.cfg.type_desc = parse_type_desc(args.type_desc_flag);
  setup.cfg.validate();

  setup.backend_cfg = file_cfg.value("backend", json{{"name", "toy"}});
  if (!setup.backend_cfg.contains("seed")) setup.backend_cfg["seed"] = setup.cfg.seed;
  setup.backend = make_backend(setup.backend_cfg);

  setup.support = read_support_jsonl_file(resolve_data_path(args.support_path));
  for (const auto& s : setup.support.sentences) validate_sentence(s, setup.catalog);
  if (args.mask >= 0) {
    const bool seed_given = args.cmd && args.cmd->count("--mask-seed") > 0;
    setup.support = apply_mask_strategy(setup.support, args.mask,
                                        seed_given ? args.mask_seed_flag : setup.cfg.seed);
  }

  if (!args.eval_path.empty())
    setup.eval_data = std::make_unique<Dataset>(parse_conll(read_file(args.eval_path), setup.catalog));

  setup.effective = json{{"train", setup.cfg.to_json()}, {"backend", setup.backend_cfg}};
  if (args.mask >= 0) setup.effective["mask"] = args.mask;
  return setup;
}

json catalog_to_json(const TypeCatalog& catalog) {
  json arr = json::array();
  for (int t = 0; t < catalog.size(); ++t)
    arr.push_back({{"name", catalog.names[t]}, {"description", catalog.descriptions[t]}});
  return arr;
}

void save_trainer_checkpoint(const std::string& path, Trainer& trainer, const json& backend_cfg) {
  json meta;
  meta["backend"] = backend_cfg;
  meta["train"] = trainer.config().to_json();
  meta["catalog"] = catalog_to_json(trainer.catalog());
  meta["config_hash"] = to_hex(trainer.config().hash());
  save_checkpoint(path, trainer.all_parameters(), meta);
}

struct LoadedModel {
  TypeCatalog catalog;
  std::unique_ptr<EncoderBackend> backend;
  std::unique_ptr<Trainer> trainer;
};

LoadedModel load_model(const std::string& ckpt_path) {
  LoadedModel model;
  // read meta first to rebuild shapes, then load tensors into them
  json j;
  try {
    j = json::parse(read_file(ckpt_path));
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint '" + ckpt_path + "': " + e.what());
  }
  const json meta = j.value("meta", json::object());
  for (const auto& entry : meta.value("catalog", json::array())) {
    model.catalog.names.push_back(entry.at("name").get<std::string>());
    model.catalog.descriptions.push_back(entry.at("description").get<std::string>());
  }
  model.catalog.validate();
  const TrainConfig cfg = TrainConfig::from_json(meta.value("train", json::object()));
  model.backend = make_backend(meta.value("backend", json{{"name", "toy"}}));
  model.trainer = std::make_unique<Trainer>(cfg, model.catalog, *model.backend);
  load_checkpoint(resolve_data_path(ckpt_path), model.trainer->all_parameters());
  return model;
}

std::string format_eval_table(const EvalReport& report) {
  char line[256];
  std::string out;
  out += "type                 tp     fp     fn\n";
  for (const auto& [name, c] : report.per_type) {
    std::snprintf(line, sizeof(line), "%-18s %5ld  %5ld  %5ld\n", name.c_str(), c.tp, c.fp, c.fn);
    out += line;
  }
  std::snprintf(line, sizeof(line), "micro P=%.4f R=%.4f F1=%.4f (gold=%ld pred=%ld matched=%ld)\n",
                report.precision, report.recall, report.f1, report.gold_entities, report.pred_entities,
                report.matched);
  out += line;
  return out;
}

int cmd_ingest(const std::string& data_path, const std::string& types_path, const std::string& profile,
               const std::string& out) {
  const TypeCatalog catalog = load_catalog(types_path);
  const Dataset ds = parse_conll(read_file(data_path), catalog);
  if (!profile.empty()) validate_against_profile(ds, profile);
  const DatasetStats stats = catalog_stats(ds);

  json stats_json;
  stats_json["sentences"] = stats.sentence_count;
  stats_json["entities"] = stats.entity_count;
  stats_json["per_type"] = stats.per_type;
  std::printf("sentences: %zu\nentities:  %zu\n", stats.sentence_count, stats.entity_count);
  for (const auto& [name, count] : stats.per_type) std::printf("  %-18s %zu\n", name.c_str(), count);

  if (!out.empty()) {
    const fs::path dir = ensure_out_dir(out);
    write_file((dir / "stats.json").string(), stats_json.dump(2) + "\n");
    write_file((dir / "normalized.conll").string(), to_conll(ds));
    RunManifest manifest;
    manifest.command = "ingest";
    manifest.config_hash = fnv1a64(stats_json.dump());
    manifest.add_input(resolve_data_path(data_path));
    manifest.add_input(resolve_data_path(types_path));
    manifest.add_artifact((dir / "stats.json").string());
    manifest.add_artifact((dir / "normalized.conll").string());
    manifest.write((dir / "manifest.json").string());
  }
  return 0;
}

int cmd_sample(const std::string& data_path, const std::string& types_path, int k_shot, uint64_t seed,
               const std::string& out) {
  const TypeCatalog catalog = load_catalog(types_path);
  const Dataset ds = parse_conll(read_file(data_path), catalog);
  const SupportSet support = greedy_sample_support(ds, k_shot, seed);

  const fs::path dir = ensure_out_dir(out);
  const std::string support_path = (dir / "support.jsonl").string();
  write_file(support_path, support_to_jsonl(support));

  const json cfg{{"k_shot", k_shot}, {"seed", seed}};
  RunManifest manifest;
  manifest.command = "sample";
  manifest.config_hash = fnv1a64(cfg.dump());
  manifest.effective_config = cfg;
  manifest.seeds = {seed};
  manifest.add_input(resolve_data_path(data_path));
  manifest.add_input(resolve_data_path(types_path));
  manifest.add_artifact(support_path);
  manifest.write((dir / "manifest.json").string());

  std::printf("sampled %zu sentences (k_shot=%d, seed=%llu) -> %s\n", support.sentences.size(), k_shot,
              static_cast<unsigned long long>(seed), support_path.c_str());
  return 0;
}

int cmd_mask(const std::string& support_path, int keep, uint64_t seed, const std::string& out) {
  const SupportSet support = read_support_jsonl_file(resolve_data_path(support_path));
  const SupportSet masked = apply_mask_strategy(support, keep, seed);

  const fs::path dir = ensure_out_dir(out);
  const std::string masked_path = (dir / "support.jsonl").string();
  write_file(masked_path, support_to_jsonl(masked));

  const json cfg{{"keep_per_type", keep}, {"seed", seed}};
  RunManifest manifest;
  manifest.command = "mask";
  manifest.config_hash = fnv1a64(cfg.dump());
  manifest.effective_config = cfg;
  manifest.seeds = {seed};
  manifest.add_input(resolve_data_path(support_path));
  manifest.add_artifact(masked_path);
  manifest.write((dir / "manifest.json").string());
  return 0;
}

int cmd_train(const TrainArgs& args) {
  LoadedSetup setup = prepare_train_setup(args);
  Trainer trainer(setup.cfg, setup.catalog, *setup.backend);
  const TrainHistory history = trainer.train(setup.support, setup.eval_data.get());

  const fs::path dir = ensure_out_dir(args.out);
  const std::string ckpt_path = (dir / "checkpoint.json").string();
  const std::string history_path = (dir / "history.jsonl").string();
  save_trainer_checkpoint(ckpt_path, trainer, setup.backend_cfg);
  write_file(history_path, history_to_jsonl(history, deterministic_output()));

  json report;
  report["steps"] = history.steps.size();
  if (!history.steps.empty()) {
    const auto& last = history.steps.back().loss;
    report["final_loss"] = {{"ce", last.ce},
                            {"type", last.type_loss},
                            {"prototype", last.prototype_loss},
                            {"total", last.total}};
  }
  if (!history.evals.empty()) report["final_f1"] = history.final_f1();
  const std::string report_path = (dir / "report.json").string();
  write_file(report_path, report.dump(2) + "\n");

  RunManifest manifest;
  manifest.command = "train";
  manifest.config_hash = fnv1a64(setup.effective.dump());
  manifest.effective_config = setup.effective;
  manifest.seeds = {setup.cfg.seed};
  manifest.add_input(resolve_data_path(args.support_path));
  manifest.add_input(resolve_data_path(args.types_path));
  if (!args.config_path.empty()) manifest.add_input(resolve_data_path(args.config_path));
  if (!args.eval_path.empty()) manifest.add_input(resolve_data_path(args.eval_path));
  manifest.add_artifact(ckpt_path);
  manifest.add_artifact(history_path);
  manifest.add_artifact(report_path);
  manifest.write((dir / "manifest.json").string());

  if (!history.evals.empty()) std::printf("final micro-F1: %.4f\n", history.final_f1());
  if (!history.steps.empty()) std::printf("final loss: %.6f\n", history.steps.back().loss.total);
  return 0;
}

int cmd_ablate(const TrainArgs& args) {
  LoadedSetup setup = prepare_train_setup(args);
  const AblationReport report =
      ablate(setup.cfg, setup.catalog, *setup.backend, setup.support, setup.eval_data.get());

  std::string table = "mode           final_total   micro_f1\n";
  json rows = json::array();
  for (const auto& row : report.rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-13s %12.6f %10.4f\n", ablation_mode_name(row.mode),
                  row.final_loss.total, row.eval_f1);
    table += line;
    rows.push_back({{"mode", ablation_mode_name(row.mode)},
                    {"final_total", row.final_loss.total},
                    {"ce", row.final_loss.ce},
                    {"type", row.final_loss.type_loss},
                    {"prototype", row.final_loss.prototype_loss},
                    {"micro_f1", row.eval_f1}});
  }
  std::fputs(table.c_str(), stdout);

  const fs::path dir = ensure_out_dir(args.out);
  write_file((dir / "ablation.txt").string(), table);
  write_file((dir / "ablation.json").string(), rows.dump(2) + "\n");

  RunManifest manifest;
  manifest.command = "ablate";
  manifest.config_hash = fnv1a64(setup.effective.dump());
  manifest.effective_config = setup.effective;
  manifest.seeds = {setup.cfg.seed};
  manifest.add_input(resolve_data_path(args.support_path));
  manifest.add_input(resolve_data_path(args.types_path));
  if (!args.eval_path.empty()) manifest.add_input(resolve_data_path(args.eval_path));
  manifest.add_artifact((dir / "ablation.txt").string());
  manifest.add_artifact((dir / "ablation.json").string());
  manifest.write((dir / "manifest.json").string());
  return 0;
}

int cmd_sweep(const TrainArgs& args, const std::vector<int>& ks, const std::vector<double>& alphas,
              const std::vector<double>& betas) {
  LoadedSetup setup = prepare_train_setup(args);
  if (!setup.eval_data) throw ConfigError("sweep: --eval data is required to rank grid points");
  const SweepReport report = sweep(setup.cfg, ks.empty() ? std::vector<int>{setup.cfg.k} : ks,
                                   alphas.empty() ? std::vector<double>{setup.cfg.alpha} : alphas,
                                   betas.empty() ? std::vector<double>{setup.cfg.beta} : betas,
                                   setup.catalog, *setup.backend, setup.support, setup.eval_data.get());

  std::string table = "   k   alpha   beta   micro_f1   final_total\n";
  json points = json::array();
  for (const auto& pt : report.points) {
    char line[160];
    std::snprintf(line, sizeof(line), "%4d  %6.2f  %5.2f  %9.4f  %12.6f\n", pt.k, pt.alpha, pt.beta, pt.f1,
                  pt.final_loss.total);
    table += line;
    points.push_back({{"k", pt.k},
                      {"alpha", pt.alpha},
                      {"beta", pt.beta},
                      {"micro_f1", pt.f1},
                      {"final_total", pt.final_loss.total}});
  }
  std::fputs(table.c_str(), stdout);

  const fs::path dir = ensure_out_dir(args.out);
  write_file((dir / "sweep.txt").string(), table);
  write_file((dir / "sweep.json").string(), points.dump(2) + "\n");

  RunManifest manifest;
  manifest.command = "sweep";
  manifest.config_hash = fnv1a64(setup.effective.dump());
  manifest.effective_config = setup.effective;
  manifest.seeds = {setup.cfg.seed};
  manifest.add_input(resolve_data_path(args.support_path));
  manifest.add_input(resolve_data_path(args.types_path));
  manifest.add_input(resolve_data_path(args.eval_path));
  manifest.add_artifact((dir / "sweep.txt").string());
  manifest.add_artifact((dir / "sweep.json").string());
  manifest.write((dir / "manifest.json").string());
  return 0;
}

int cmd_eval(const std::string& gold_path, const std::string& pred_path, const std::string& ckpt_path,
             const std::string& types_path, const std::string& out) {
  TypeCatalog catalog;
  std::vector<Prediction> preds;
  Dataset gold;
  std::string written_preds;

  if (!pred_path.empty()) {
    if (types_path.empty()) throw ConfigError("eval: --types is required with --pred");
    catalog = load_catalog(types_path);
    gold = parse_conll(read_file(gold_path), catalog);
    const Dataset predicted = parse_conll(read_file(pred_path), catalog);
    if (predicted.sentences.size() != gold.sentences.size())
      throw AlignmentError("eval: prediction/gold sentence count mismatch");
    for (size_t i = 0; i < predicted.sentences.size(); ++i) {
      Prediction p;
      p.id = gold.sentences[i].id;  // two-column files align by order
      p.tags = predicted.sentences[i].labels;
      preds.push_back(std::move(p));
    }
  } else if (!ckpt_path.empty()) {
    LoadedModel model = load_model(ckpt_path);
    catalog = model.catalog;
    gold = parse_conll(read_file(gold_path), catalog);
    for (const auto& s : gold.sentences)
      preds.push_back(decode(s, *model.backend, model.trainer->classifier(), catalog,
                             model.trainer->config().normalize));
    written_preds = predictions_to_conll(gold.sentences, preds);
  } else {
    throw ConfigError("eval: provide either --pred or --checkpoint");
  }

  const EvalReport report = micro_f1(preds, gold.sentences, catalog);
  const std::string table = format_eval_table(report);
  std::fputs(table.c_str(), stdout);

  if (!out.empty()) {
    const fs::path dir = ensure_out_dir(out);
    write_file((dir / "report.json").string(), eval_report_to_json(report).dump(2) + "\n");
    write_file((dir / "report.txt").string(), table);
    RunManifest manifest;
    manifest.command = "eval";
    manifest.config_hash = fnv1a64(table);
    manifest.add_input(resolve_data_path(gold_path));
    if (!pred_path.empty()) manifest.add_input(resolve_data_path(pred_path));
    if (!ckpt_path.empty()) manifest.add_input(resolve_data_path(ckpt_path));
    manifest.add_artifact((dir / "report.json").string());
    manifest.add_artifact((dir / "report.txt").string());
    if (!written_preds.empty()) {
      write_file((dir / "predictions.conll").string(), written_preds);
      manifest.add_artifact((dir / "predictions.conll").string());
    }
    manifest.write((dir / "manifest.json").string());
  }
  return 0;
}

int cmd_visualize(const std::string& ckpt_path, const std::string& data_path, const std::string& out,
                  bool dump_clusters) {
  LoadedModel model = load_model(ckpt_path);
  const Dataset data = parse_conll(read_file(data_path), model.catalog);
  const bool normalize = model.trainer->config().normalize;
  const ProjectionResult projection = project_tokens_2d(data.sentences, *model.backend, normalize);

  const fs::path dir = ensure_out_dir(out);
  {
    std::ofstream csv(dir / "projection.csv");
    write_projection_csv(projection, csv);
    std::ofstream svg(dir / "projection.svg");
    write_projection_svg(projection, model.catalog, svg);
  }

  RunManifest manifest;
  manifest.command = "visualize";
  manifest.config_hash = model.trainer->config().hash();
  manifest.effective_config = model.trainer->config().to_json();
  manifest.add_input(resolve_data_path(ckpt_path));
  manifest.add_input(resolve_data_path(data_path));
  manifest.add_artifact((dir / "projection.csv").string());
  manifest.add_artifact((dir / "projection.svg").string());

  if (dump_clusters) {
    const TypeAnchors anchors = model.trainer->current_anchors();
    const TrainConfig& cfg = model.trainer->config();
    json dump = json::array();
    for (size_t i = 0; i < data.sentences.size(); ++i) {
      const auto& s = data.sentences[i];
      const TokenEmbeddings emb = encode_tokens(s, *model.backend, normalize);
      std::vector<int> o_rows;
      for (size_t t = 0; t < s.labels.size(); ++t)
        if (s.labels[t] == "O") o_rows.push_back(static_cast<int>(t));
      json entry;
      entry["id"] = s.id;
      if (!o_rows.empty()) {
        Eigen::MatrixXd points(o_rows.size(), emb.H.cols());
        for (size_t r = 0; r < o_rows.size(); ++r) points.row(r) = emb.H.row(o_rows[r]);
        const PrototypeSet protos =
            kmeans(points, cfg.k, derive_seed(cfg.seed, 0x6b17, i), cfg.kmeans_max_iter, cfg.kmeans_tol);
        const ProtoPartition part = partition_prototypes(protos, anchors, cfg.alpha);
        json centers = json::array();
        for (Eigen::Index c = 0; c < protos.centers.rows(); ++c) {
          std::vector<double> row(protos.centers.cols());
          for (Eigen::Index d = 0; d < protos.centers.cols(); ++d) row[d] = protos.centers(c, d);
          centers.push_back(row);
        }
        entry["centers"] = centers;
        entry["o_token_rows"] = o_rows;
        entry["assignment"] = protos.assignment;
        json partition = json::object();
        for (int t = 0; t < model.catalog.size(); ++t)
          partition[model.catalog.names[t]] = {{"positives", part.positives[t]},
                                               {"negatives", part.negatives[t]}};
        entry["partition"] = partition;
      }
      dump.push_back(std::move(entry));
    }
    write_file((dir / "clusters.json").string(), dump.dump(2) + "\n");
    manifest.add_artifact((dir / "clusters.json").string());
  }

  manifest.write((dir / "manifest.json").string());
  std::printf("projected %zu tokens; 2-component variance ratio %.4f\n", projection.points.size(),
              projection.explained_variance_ratio);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weighted prototypical contrastive learning for few-shot NER"};
  app.require_subcommand(1);

  // ingest
  std::string in_data, in_types, in_profile, in_out;
  auto* ingest = app.add_subcommand("ingest", "parse + validate a CoNLL corpus, print stats");
  ingest->add_option("--data", in_data)->required();
  ingest->add_option("--types", in_types)->required();
  ingest->add_option("--expect-profile", in_profile, "validate against a published corpus profile");
  ingest->add_option("--out", in_out, "write stats.json + normalized.conll + manifest");

  // sample
  std::string sm_data, sm_types, sm_out = ".";
  int sm_kshot = 5;
  uint64_t sm_seed = 1;
  auto* sample = app.add_subcommand("sample", "greedy-sample a K-shot support set");
  sample->add_option("--data", sm_data)->required();
  sample->add_option("--types", sm_types)->required();
  sample->add_option("--k-shot", sm_kshot);
  sample->add_option("--seed", sm_seed);
  sample->add_option("--out", sm_out);

  // mask
  std::string mk_support, mk_out = ".";
  int mk_keep = 2;
  uint64_t mk_seed = 1;
  auto* mask = app.add_subcommand("mask", "keep N entities per type, relabel the rest O");
  mask->add_option("--support", mk_support)->required();
  mask->add_option("--keep", mk_keep);
  mask->add_option("--seed", mk_seed);
  mask->add_option("--out", mk_out);

  // train / ablate / sweep share flags
  TrainArgs tr_args, ab_args, sw_args;
  auto* train = app.add_subcommand("train", "train on a support set");
  tr_args.cmd = train;
  add_train_flags(train, tr_args);

  auto* ablate_cmd = app.add_subcommand("ablate", "run full / no_weight / no_prototype with shared seeds");
  ab_args.cmd = ablate_cmd;
  add_train_flags(ablate_cmd, ab_args);

  std::vector<int> sw_ks;
  std::vector<double> sw_alphas, sw_betas;
  auto* sweep_cmd = app.add_subcommand("sweep", "grid-search k / alpha / beta");
  sw_args.cmd = sweep_cmd;
  add_train_flags(sweep_cmd, sw_args);
  sweep_cmd->add_option("--grid-k", sw_ks, "cluster counts")->delimiter(',');
  sweep_cmd->add_option("--grid-alpha", sw_alphas, "distance thresholds")->delimiter(',');
  sweep_cmd->add_option("--grid-beta", sw_betas, "beta values")->delimiter(',');

  // eval
  std::string ev_gold, ev_pred, ev_ckpt, ev_types, ev_out;
  auto* eval_cmd = app.add_subcommand("eval", "entity-level micro P/R/F1");
  eval_cmd->add_option("--gold", ev_gold)->required();
  eval_cmd->add_option("--pred", ev_pred, "two-column CoNLL predictions");
  eval_cmd->add_option("--checkpoint", ev_ckpt, "decode with a trained checkpoint instead");
  eval_cmd->add_option("--types", ev_types);
  eval_cmd->add_option("--out", ev_out);

  // visualize
  std::string vz_ckpt, vz_data, vz_out = ".";
  bool vz_dump = false;
  auto* viz = app.add_subcommand("visualize", "2D PCA projection of token embeddings");
  viz->add_option("--checkpoint", vz_ckpt)->required();
  viz->add_option("--data", vz_data)->required();
  viz->add_option("--out", vz_out);
  viz->add_flag("--dump-clusters", vz_dump, "also dump per-sentence centers/partition as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) return cmd_ingest(in_data, in_types, in_profile, in_out);
    if (sample->parsed()) return cmd_sample(sm_data, sm_types, sm_kshot, sm_seed, sm_out);
    if (mask->parsed()) return cmd_mask(mk_support, mk_keep, mk_seed, mk_out);
    if (train->parsed()) return cmd_train(tr_args);
    if (ablate_cmd->parsed()) return cmd_ablate(ab_args);
    if (sweep_cmd->parsed()) return cmd_sweep(sw_args, sw_ks, sw_alphas, sw_betas);
    if (eval_cmd->parsed()) return cmd_eval(ev_gold, ev_pred, ev_ckpt, ev_types, ev_out);
    if (viz->parsed()) return cmd_visualize(vz_ckpt, vz_data, vz_out, vz_dump);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
