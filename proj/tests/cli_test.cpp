#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "wprocer/corpus.hpp"
#include "wprocer/synthetic.hpp"

using namespace wprocer;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRunner {
  std::string cli;
  fs::path work;

  CliRunner() {
    const char* env = std::getenv("WPROCER_CLI");
    REQUIRE(env != nullptr);
    cli = env;
    work = fs::temp_directory_path() / ("wprocer_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);
  }
  ~CliRunner() { fs::remove_all(work); }

  int run(const std::string& args, std::string* out = nullptr, std::string* err = nullptr) const {
    const fs::path out_path = work / "stdout.txt";
    const fs::path err_path = work / "stderr.txt";
    const std::string cmd = "cd " + work.string() + " && SOURCE_DATE_EPOCH=1690000000 " + cli + " " + args +
                            " > " + out_path.string() + " 2> " + err_path.string();
    const int status = std::system(cmd.c_str());
    if (out) *out = slurp(out_path);
    if (err) *err = slurp(err_path);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream(work / name) << content;
  }
};

void write_fixture_corpus(const CliRunner& runner) {
  SyntheticSpec spec;
  spec.n_train = 60;
  spec.n_test = 25;
  spec.seed = 8;
  const SyntheticCorpus corpus = make_separable_corpus(spec);
  runner.write("train.conll", to_conll(corpus.train));
  runner.write("test.conll", to_conll(corpus.test));
  json types = json::array();
  for (int t = 0; t < corpus.train.catalog.size(); ++t)
    types.push_back({{"name", corpus.train.catalog.names[t]},
                     {"description", corpus.train.catalog.descriptions[t]}});
  runner.write("types.json", types.dump(2));
}

}  // namespace

TEST_CASE("cli pipeline: ingest, sample, mask, train, eval, visualize") {
  CliRunner runner;
  write_fixture_corpus(runner);
  std::string out, err;

  SECTION("ingest prints stats and writes a manifest") {
    REQUIRE(runner.run("ingest --data train.conll --types types.json --out ingested", &out) == 0);
    CHECK(out.find("sentences: 60") != std::string::npos);
    CHECK(fs::exists(runner.work / "ingested" / "stats.json"));
    CHECK(fs::exists(runner.work / "ingested" / "normalized.conll"));
    CHECK(fs::exists(runner.work / "ingested" / "manifest.json"));
  }

  SECTION("unreadable input exits with code 2") {
    CHECK(runner.run("sample --data missing.conll --types types.json --out s", &out, &err) == 2);
    CHECK(err.find("missing.conll") != std::string::npos);
  }

  SECTION("sample is deterministic and manifests carry digests") {
    REQUIRE(runner.run("sample --data train.conll --types types.json --k-shot 2 --seed 4 --out s1") == 0);
    const std::string first = CliRunner::slurp(runner.work / "s1" / "support.jsonl");
    const std::string first_manifest = CliRunner::slurp(runner.work / "s1" / "manifest.json");
    REQUIRE(runner.run("sample --data train.conll --types types.json --k-shot 2 --seed 4 --out s1") == 0);
    CHECK(CliRunner::slurp(runner.work / "s1" / "support.jsonl") == first);
    CHECK(CliRunner::slurp(runner.work / "s1" / "manifest.json") == first_manifest);

    const json manifest = json::parse(first_manifest);
    CHECK(manifest.at("command") == "sample");
    CHECK(manifest.at("inputs").size() == 2);
    for (const auto& artifact : manifest.at("artifacts"))
      CHECK(artifact.at("digest").get<std::string>().rfind("fnv1a64:", 0) == 0);
  }

  SECTION("mask keeps the requested number of entities") {
    REQUIRE(runner.run("sample --data train.conll --types types.json --k-shot 3 --seed 4 --out s2") == 0);
    REQUIRE(runner.run("mask --support s2/support.jsonl --keep 0 --seed 1 --out m0") == 0);
    const SupportSet masked = read_support_jsonl_file((runner.work / "m0" / "support.jsonl").string());
    for (const auto& s : masked.sentences)
      for (const auto& tag : s.labels) CHECK(tag == "O");
    CHECK(masked.mask_keep == 0);
  }

  SECTION("train, eval from checkpoint, visualize") {
    REQUIRE(runner.run("sample --data train.conll --types types.json --k-shot 5 --seed 4 --out s3") == 0);
    REQUIRE(runner.run("train --support s3/support.jsonl --types types.json --eval test.conll "
                       "--steps 25 --lr 0.05 --seed 4 --out t1",
                       &out) == 0);
    CHECK(out.find("final micro-F1") != std::string::npos);
    CHECK(fs::exists(runner.work / "t1" / "checkpoint.json"));
    CHECK(fs::exists(runner.work / "t1" / "history.jsonl"));
    CHECK(fs::exists(runner.work / "t1" / "manifest.json"));

    // history lines parse and carry the config hash
    std::ifstream hist(runner.work / "t1" / "history.jsonl");
    std::string line;
    int steps = 0;
    while (std::getline(hist, line)) {
      const json rec = json::parse(line);
      if (rec.at("kind") == "step") {
        ++steps;
        CHECK(rec.contains("config_hash"));
        CHECK(rec.at("wall_ms") == 0.0);  // SOURCE_DATE_EPOCH zeroes wall clock
      }
    }
    CHECK(steps == 25);

    REQUIRE(runner.run("eval --gold test.conll --checkpoint t1/checkpoint.json --out e1", &out) == 0);
    CHECK(out.find("micro P=") != std::string::npos);
    CHECK(fs::exists(runner.work / "e1" / "report.json"));
    CHECK(fs::exists(runner.work / "e1" / "predictions.conll"));

    REQUIRE(runner.run("visualize --checkpoint t1/checkpoint.json --data test.conll --out v1 "
                       "--dump-clusters",
                       &out) == 0);
    CHECK(fs::exists(runner.work / "v1" / "projection.csv"));
    CHECK(fs::exists(runner.work / "v1" / "projection.svg"));
    CHECK(fs::exists(runner.work / "v1" / "clusters.json"));
    const json clusters = json::parse(CliRunner::slurp(runner.work / "v1" / "clusters.json"));
    CHECK(clusters.size() == 25);
  }

  SECTION("eval on gold as predictions prints F1 = 1.0000") {
    REQUIRE(runner.run("eval --gold test.conll --pred test.conll --types types.json", &out) == 0);
    CHECK(out.find("F1=1.0000") != std::string::npos);
  }

  SECTION("ablate prints exactly three mode rows") {
    REQUIRE(runner.run("sample --data train.conll --types types.json --k-shot 2 --seed 4 --out s4") == 0);
    REQUIRE(runner.run("ablate --support s4/support.jsonl --types types.json --eval test.conll "
                       "--steps 5 --lr 0.02 --seed 4 --out a1",
                       &out) == 0);
    CHECK(out.find("full") != std::string::npos);
    CHECK(out.find("no_weight") != std::string::npos);
    CHECK(out.find("no_prototype") != std::string::npos);
    const json rows = json::parse(CliRunner::slurp(runner.work / "a1" / "ablation.json"));
    CHECK(rows.size() == 3);
  }

  SECTION("sweep ranks grid points by F1") {
    REQUIRE(runner.run("sample --data train.conll --types types.json --k-shot 2 --seed 4 --out s5") == 0);
    REQUIRE(runner.run("sweep --support s5/support.jsonl --types types.json --eval test.conll "
                       "--steps 5 --lr 0.02 --seed 4 --grid-k 2,3 --grid-beta 0.0,1.0 --out w1",
                       &out) == 0);
    const json points = json::parse(CliRunner::slurp(runner.work / "w1" / "sweep.json"));
    CHECK(points.size() == 4);
    for (size_t i = 1; i < points.size(); ++i)
      CHECK(points[i - 1].at("micro_f1").get<double>() >= points[i].at("micro_f1").get<double>());
  }

  SECTION("train with --mask applies the Mask-N protocol") {
    REQUIRE(runner.run("sample --data train.conll --types types.json --k-shot 5 --seed 4 --out s6") == 0);
    REQUIRE(runner.run("train --support s6/support.jsonl --types types.json --steps 2 --lr 0.02 "
                       "--seed 4 --mask 2 --out t2") == 0);
    const json manifest = json::parse(CliRunner::slurp(runner.work / "t2" / "manifest.json"));
    CHECK(manifest.at("effective_config").at("mask") == 2);
  }

  SECTION("invalid config values are enumerated together") {
    REQUIRE(runner.run("sample --data train.conll --types types.json --k-shot 2 --seed 4 --out s7") == 0);
    const int code = runner.run("train --support s7/support.jsonl --types types.json --steps 2 "
                                "--seed 4 --k 0 --beta 3.0 --out t3",
                                &out, &err);
    CHECK(code == 1);
    CHECK(err.find("k:") != std::string::npos);
    CHECK(err.find("beta:") != std::string::npos);
  }

  SECTION("WPROCER_DATA_DIR resolves relative data paths") {
    fs::create_directories(runner.work / "datadir");
    fs::copy_file(runner.work / "train.conll", runner.work / "datadir" / "elsewhere.conll");
    const std::string cmd = "cd " + runner.work.string() +
                            " && WPROCER_DATA_DIR=datadir SOURCE_DATE_EPOCH=1690000000 " + runner.cli +
                            " ingest --data elsewhere.conll --types types.json > /dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
  }

  SECTION("type-description variant flag is honoured") {
    REQUIRE(runner.run("sample --data train.conll --types types.json --k-shot 2 --seed 4 --out s8") == 0);
    REQUIRE(runner.run("train --support s8/support.jsonl --types types.json --steps 2 --lr 0.02 "
                       "--seed 4 --type-desc surface_name --out t4") == 0);
    const json manifest = json::parse(CliRunner::slurp(runner.work / "t4" / "manifest.json"));
    CHECK(manifest.at("effective_config").at("train").at("type_desc") == "surface_name");
    CHECK(runner.run("train --support s8/support.jsonl --types types.json --steps 2 --seed 4 "
                     "--type-desc bogus --out t5") == 1);
  }
}
