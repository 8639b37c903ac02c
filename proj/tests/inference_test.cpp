#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <sstream>

#include "helpers/scalar_oracle.hpp"
#include "helpers/test_util.hpp"
#include "wprocer/inference_eval.hpp"
#include "wprocer/synthetic.hpp"

using namespace wprocer;
using Catch::Approx;

namespace {

TypeCatalog ab_catalog() {
  TypeCatalog c;
  c.names = {"A", "B"};
  c.descriptions = {"the first kind", "the second kind"};
  return c;
}

/// Test stub returning preset per-token vectors; context-free by design.
class FixedBackend final : public EncoderBackend {
 public:
  FixedBackend(std::map<std::string, Eigen::VectorXd> table, int d)
      : name_("fixed"), table_(std::move(table)), d_(d) {}

  const std::string& name() const override { return name_; }
  int dim() const override { return d_; }

  Eigen::MatrixXd forward(const std::vector<std::string>& tokens) const override {
    Eigen::MatrixXd h(tokens.size(), d_);
    for (size_t i = 0; i < tokens.size(); ++i) h.row(i) = table_.at(tokens[i]).transpose();
    return h;
  }
  void backward(const std::vector<std::string>&, const Eigen::MatrixXd&) override {}
  std::vector<ParamRef> parameters() override { return {}; }
  std::unique_ptr<EncoderBackend> clone() const override { return std::make_unique<FixedBackend>(*this); }

 private:
  std::string name_;
  std::map<std::string, Eigen::VectorXd> table_;
  int d_;
};

Prediction pred_of(const std::string& id, std::vector<std::string> tags) {
  Prediction p;
  p.id = id;
  p.tags = std::move(tags);
  return p;
}

Sentence gold_of(const std::string& id, std::vector<std::string> labels) {
  Sentence s;
  s.id = id;
  s.labels = std::move(labels);
  s.tokens.assign(s.labels.size(), "tok");
  return s;
}

}  // namespace

TEST_CASE("argmax decoding: one-hot, scale invariance, lowest-index ties") {
  Eigen::MatrixXd logits(3, 3);
  logits << 0, 5, 0, 1, 1, 1, 0.2, 0.1, 0.2;
  const auto classes = argmax_classes(logits);
  CHECK(classes == std::vector<int>{1, 0, 0});
  // any strictly increasing transform applied uniformly per token row
  // cannot change the argmax
  const auto scaled = argmax_classes(Eigen::MatrixXd(logits * 17.0));
  CHECK(scaled == classes);
  Eigen::MatrixXd warped = logits;
  for (Eigen::Index i = 0; i < warped.rows(); ++i)
    warped.row(i) = (warped.row(i).array() * (2.0 + i) + 5.0 * i).tanh();
  CHECK(argmax_classes(warped) == classes);
}

TEST_CASE("argmax matches the scalar-loop oracle on random logits") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 1 + static_cast<int>(rng.below(8));
    const int cols = 2 + static_cast<int>(rng.below(5));
    Eigen::MatrixXd logits = Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return rng.normal(); });
    CHECK(argmax_classes(logits) == oracle::argmax_oracle(testutil::to_oracle(logits)));
  }
}

TEST_CASE("decode produces IO tags with the O class last") {
  const TypeCatalog catalog = ab_catalog();
  std::map<std::string, Eigen::VectorXd> table;
  table["a"] = Eigen::Vector2d(1.0, 0.0);
  table["b"] = Eigen::Vector2d(0.0, 1.0);
  table["o"] = Eigen::Vector2d(-1.0, -1.0);
  FixedBackend backend(table, 2);

  LinearClassifier clf(3, 2, 1);
  // rig the classifier so class scores mirror the input directions
  auto params = clf.parameters();
  Eigen::Map<Eigen::MatrixXd> w(params[0].data, 3, 2);
  w << 2, 0, 0, 2, -1, -1;
  Eigen::Map<Eigen::VectorXd> bias(params[1].data, 3);
  bias.setZero();

  Sentence s;
  s.id = "x";
  s.tokens = {"a", "b", "o", "a"};
  s.labels = {"I-A", "I-B", "O", "I-A"};
  const Prediction pred = decode(s, backend, clf, catalog, false);
  CHECK(pred.tags == std::vector<std::string>{"I-A", "I-B", "O", "I-A"});
  CHECK(pred.max_scores.size() == 4);
}

TEST_CASE("extract_entities fixtures") {
  const auto single = extract_entities({"O", "I-Dis", "I-Dis", "O"});
  REQUIRE(single.size() == 1);
  CHECK(single[0] == EntitySpan{1, 3, "Dis"});

  const auto split = extract_entities({"I-A", "I-B"});
  REQUIRE(split.size() == 2);
  CHECK(split[0] == EntitySpan{0, 1, "A"});
  CHECK(split[1] == EntitySpan{1, 2, "B"});

  CHECK_THROWS_AS(extract_entities({"I-A", "garbage"}), ValidationError);
  CHECK_THROWS_AS(extract_entities({"B-A"}), ValidationError);
}

TEST_CASE("extract_entities equals the run scanner on every IO sequence up to length 7") {
  const std::vector<std::string> alphabet = {"O", "I-A", "I-B"};
  for (int len = 1; len <= 7; ++len) {
    long combos = 1;
    for (int i = 0; i < len; ++i) combos *= 3;
    for (long code = 0; code < combos; ++code) {
      long c = code;
      std::vector<std::string> tags;
      for (int i = 0; i < len; ++i) {
        tags.push_back(alphabet[c % 3]);
        c /= 3;
      }
      const auto impl = extract_entities(tags);
      const auto want = oracle::run_scanner_oracle(tags);
      REQUIRE(impl.size() == want.size());
      for (size_t i = 0; i < impl.size(); ++i) {
        CHECK(impl[i].begin == want[i].begin);
        CHECK(impl[i].end == want[i].end);
        CHECK(impl[i].type == want[i].type);
      }
    }
  }
}

TEST_CASE("micro_f1 hand-counted fixtures") {
  const TypeCatalog catalog = ab_catalog();

  SECTION("perfect predictions") {
    const std::vector<Sentence> gold = {gold_of("s0", {"O", "I-A", "I-A", "O"})};
    const std::vector<Prediction> preds = {pred_of("s0", {"O", "I-A", "I-A", "O"})};
    const EvalReport r = micro_f1(preds, gold, catalog);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
  }

  SECTION("span boundaries must match exactly") {
    const std::vector<Sentence> gold = {gold_of("s0", {"O", "I-A", "I-A", "O"})};  // (1,3,A)
    const std::vector<Prediction> preds = {pred_of("s0", {"O", "I-A", "O", "O"})};  // (1,2,A)
    const EvalReport r = micro_f1(preds, gold, catalog);
    CHECK(r.per_type.at("A").tp == 0);
    CHECK(r.per_type.at("A").fp == 1);
    CHECK(r.per_type.at("A").fn == 1);
    CHECK(r.f1 == 0.0);
  }

  SECTION("one hit and one spurious out of two gold gives 0.5") {
    const std::vector<Sentence> gold = {gold_of("s0", {"I-A", "O", "I-B", "O"})};
    const std::vector<Prediction> preds = {pred_of("s0", {"I-A", "O", "O", "I-B"})};
    const EvalReport r = micro_f1(preds, gold, catalog);
    CHECK(r.precision == Approx(0.5));
    CHECK(r.recall == Approx(0.5));
    CHECK(r.f1 == Approx(0.5));
  }
}

TEST_CASE("micro_f1 is invariant under sentence order") {
  const TypeCatalog catalog = ab_catalog();
  std::vector<Sentence> gold = {gold_of("s0", {"I-A", "O"}), gold_of("s1", {"O", "I-B"}),
                                gold_of("s2", {"I-B", "I-A"})};
  std::vector<Prediction> preds = {pred_of("s0", {"I-A", "O"}), pred_of("s1", {"I-B", "O"}),
                                   pred_of("s2", {"I-B", "I-A"})};
  const EvalReport base = micro_f1(preds, gold, catalog);
  std::reverse(gold.begin(), gold.end());
  std::reverse(preds.begin(), preds.end());
  const EvalReport flipped = micro_f1(preds, gold, catalog);
  CHECK(base.f1 == flipped.f1);
  CHECK(base.precision == flipped.precision);
  CHECK(base.recall == flipped.recall);
}

TEST_CASE("micro_f1 rejects misaligned inputs") {
  const TypeCatalog catalog = ab_catalog();
  const std::vector<Sentence> gold = {gold_of("s0", {"I-A"})};
  CHECK_THROWS_AS(micro_f1({pred_of("other", {"I-A"})}, gold, catalog), AlignmentError);
  CHECK_THROWS_AS(micro_f1({pred_of("s0", {"I-A", "O"})}, gold, catalog), AlignmentError);
}

TEST_CASE("F1 is 1 exactly when every predicted entity set matches gold") {
  SyntheticSpec spec;
  spec.n_train = 10;
  spec.n_test = 1;
  const Dataset ds = make_separable_corpus(spec).train;
  std::vector<Prediction> preds;
  for (const auto& s : ds.sentences) preds.push_back(pred_of(s.id, s.labels));
  const EvalReport r = micro_f1(preds, ds.sentences, ds.catalog);
  CHECK(r.f1 == 1.0);
  // flip one token of one entity
  for (auto& p : preds) {
    bool changed = false;
    for (auto& tag : p.tags)
      if (tag != "O") {
        tag = "O";
        changed = true;
        break;
      }
    if (changed) break;
  }
  const EvalReport worse = micro_f1(preds, ds.sentences, ds.catalog);
  CHECK(worse.f1 < 1.0);
}

TEST_CASE("PCA projection of 2D embeddings preserves pairwise distances") {
  std::map<std::string, Eigen::VectorXd> table;
  table["p"] = Eigen::Vector2d(0.0, 0.0);
  table["q"] = Eigen::Vector2d(3.0, 1.0);
  table["r"] = Eigen::Vector2d(-1.0, 2.0);
  FixedBackend backend(table, 2);
  Sentence s;
  s.id = "s0";
  s.tokens = {"p", "q", "r"};
  s.labels = {"O", "I-A", "O"};

  const ProjectionResult proj = project_tokens_2d({s}, backend, false);
  REQUIRE(proj.points.size() == 3);
  auto dist = [&](int i, int j) {
    const double dx = proj.points[i].x - proj.points[j].x;
    const double dy = proj.points[i].y - proj.points[j].y;
    return std::sqrt(dx * dx + dy * dy);
  };
  CHECK(dist(0, 1) == Approx((table["p"] - table["q"]).norm()).margin(1e-9));
  CHECK(dist(0, 2) == Approx((table["p"] - table["r"]).norm()).margin(1e-9));
  CHECK(dist(1, 2) == Approx((table["q"] - table["r"]).norm()).margin(1e-9));
  CHECK(proj.explained_variance_ratio == Approx(1.0).margin(1e-12));
}

TEST_CASE("duplicate embeddings project to identical coordinates") {
  std::map<std::string, Eigen::VectorXd> table;
  table["same"] = Eigen::Vector3d(1.0, 2.0, 3.0);
  table["other"] = Eigen::Vector3d(-1.0, 0.0, 1.0);
  FixedBackend backend(table, 3);
  Sentence s;
  s.id = "s0";
  s.tokens = {"same", "other", "same"};
  s.labels = {"O", "O", "O"};
  const ProjectionResult proj = project_tokens_2d({s}, backend, false);
  CHECK(proj.points[0].x == Approx(proj.points[2].x).margin(1e-12));
  CHECK(proj.points[0].y == Approx(proj.points[2].y).margin(1e-12));
}

TEST_CASE("explained variance matches an eigen-decomposition of the covariance") {
  Rng rng(90);
  const int n = 40, d = 6;
  std::map<std::string, Eigen::VectorXd> table;
  Sentence s;
  s.id = "s0";
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v[j] = rng.normal() * (j + 1);
    const std::string tok = "t" + std::to_string(i);
    table[tok] = v;
    s.tokens.push_back(tok);
    s.labels.push_back("O");
  }
  FixedBackend backend(table, d);
  const ProjectionResult proj = project_tokens_2d({s}, backend, false);

  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) x.row(i) = table["t" + std::to_string(i)].transpose();
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd ev = eig.eigenvalues();  // ascending
  const double want_ratio = (ev[d - 1] + ev[d - 2]) / ev.sum();
  CHECK(proj.explained_variance_ratio == Approx(want_ratio).margin(1e-8));
  CHECK(proj.component_variance[0] == Approx(ev[d - 1]).margin(1e-8));
  CHECK(proj.component_variance[1] == Approx(ev[d - 2]).margin(1e-8));
}

TEST_CASE("projection needs at least two tokens") {
  std::map<std::string, Eigen::VectorXd> table;
  table["only"] = Eigen::Vector2d(1.0, 0.0);
  FixedBackend backend(table, 2);
  Sentence s;
  s.id = "s0";
  s.tokens = {"only"};
  s.labels = {"O"};
  CHECK_THROWS_AS(project_tokens_2d({s}, backend, false), ProjectionError);
}

TEST_CASE("projection CSV and SVG are written") {
  std::map<std::string, Eigen::VectorXd> table;
  table["a"] = Eigen::Vector2d(1.0, 0.0);
  table["b,with\"stuff"] = Eigen::Vector2d(0.0, 1.0);
  FixedBackend backend(table, 2);
  Sentence s;
  s.id = "s0";
  s.tokens = {"a", "b,with\"stuff"};
  s.labels = {"I-A", "O"};
  const ProjectionResult proj = project_tokens_2d({s}, backend, false);

  std::ostringstream csv;
  write_projection_csv(proj, csv);
  CHECK(csv.str().find("token,x,y,gold_label,is_entity") == 0);
  CHECK(csv.str().find("\"b,with\"\"stuff\"") != std::string::npos);

  std::ostringstream svg;
  write_projection_svg(proj, ab_catalog(), svg);
  CHECK(svg.str().find("<svg") == 0);
  CHECK(svg.str().find("circle") != std::string::npos);
}

TEST_CASE("silhouette separation ranks separated groups above mixed ones") {
  Eigen::MatrixXd separated(6, 2);
  separated << 0, 0, 0.1, 0, 0, 0.1, 5, 5, 5.1, 5, 5, 5.1;
  const std::vector<bool> flags = {true, true, true, false, false, false};
  const double good = silhouette_separation(separated, flags);

  Eigen::MatrixXd mixed(6, 2);
  mixed << 0, 0, 5, 5, 0.1, 0, 5.1, 5, 0, 0.1, 5, 5.1;
  const double bad = silhouette_separation(mixed, flags);
  CHECK(good > 0.9);
  CHECK(bad < good);

  CHECK_THROWS_AS(silhouette_separation(separated, std::vector<bool>(6, true)), ValidationError);
}
