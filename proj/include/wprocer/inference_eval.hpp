#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "wprocer/common.hpp"
#include "wprocer/corpus.hpp"
#include "wprocer/encoder.hpp"
#include "wprocer/losses.hpp"

namespace wprocer {

struct Prediction {
  std::string id;
  std::vector<std::string> tags;
  std::vector<double> max_scores;
};

/// Per-row argmax; ties go to the lowest class index.
inline std::vector<int> argmax_classes(const Eigen::MatrixXd& logits) {
  std::vector<int> out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = static_cast<int>(c);
    out[i] = best;
  }
  return out;
}

inline std::string class_to_tag(int cls, const TypeCatalog& catalog) {
  return cls == catalog.size() ? std::string("O") : "I-" + catalog.names[cls];
}

inline int tag_to_class(const std::string& tag, const TypeCatalog& catalog) {
  if (tag == "O") return catalog.size();
  const int t = catalog.index_of(tag.substr(2));
  if (t < 0) throw CatalogError("tag_to_class: type '" + tag.substr(2) + "' not in catalog");
  return t;
}

/// Argmax decoding over the classifier head (n types + O as the last class).
inline Prediction decode(const Sentence& sentence, const EncoderBackend& backend,
                         const LinearClassifier& classifier, const TypeCatalog& catalog, bool normalize) {
  const TokenEmbeddings emb = encode_tokens(sentence, backend, normalize);
  const Eigen::MatrixXd logits = classifier.forward(emb.H);
  const std::vector<int> classes = argmax_classes(logits);
  Prediction pred;
  pred.id = sentence.id;
  pred.tags.reserve(classes.size());
  pred.max_scores.reserve(classes.size());
  for (size_t i = 0; i < classes.size(); ++i) {
    pred.tags.push_back(class_to_tag(classes[i], catalog));
    pred.max_scores.push_back(logits(static_cast<Eigen::Index>(i), classes[i]));
  }
  return pred;
}

struct TypeCounts {
  long tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::map<std::string, TypeCounts> per_type;
  long gold_entities = 0;
  long pred_entities = 0;
  long matched = 0;
};

/// Entity-level micro precision/recall/F1 over exact (span, type) matches.
inline EvalReport micro_f1(const std::vector<Prediction>& preds, const std::vector<Sentence>& gold,
                           const TypeCatalog& catalog) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : preds) by_id[p.id] = &p;
  if (by_id.size() != preds.size()) throw AlignmentError("micro_f1: duplicate prediction ids");
  if (preds.size() != gold.size()) throw AlignmentError("micro_f1: prediction/gold count mismatch");

  EvalReport report;
  for (const auto& name : catalog.names) report.per_type[name] = TypeCounts{};
  for (const auto& g : gold) {
    const auto it = by_id.find(g.id);
    if (it == by_id.end()) throw AlignmentError("micro_f1: no prediction for sentence '" + g.id + "'");
    const Prediction& p = *it->second;
    if (p.tags.size() != g.labels.size())
      throw AlignmentError("micro_f1: length mismatch on sentence '" + g.id + "'");

    const auto gold_spans = extract_entities(g.labels);
    const auto pred_spans = extract_entities(p.tags);
    const std::set<EntitySpan> gold_set(gold_spans.begin(), gold_spans.end());
    report.gold_entities += static_cast<long>(gold_spans.size());
    report.pred_entities += static_cast<long>(pred_spans.size());
    for (const auto& span : pred_spans) {
      if (gold_set.count(span)) {
        ++report.per_type[span.type].tp;
        ++report.matched;
      } else {
        ++report.per_type[span.type].fp;
      }
    }
    for (const auto& span : gold_spans)
      if (!std::count(pred_spans.begin(), pred_spans.end(), span)) ++report.per_type[span.type].fn;
  }

  long tp = 0, fp = 0, fn = 0;
  for (const auto& [name, c] : report.per_type) {
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
  }
  report.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  report.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  report.f1 = (report.precision + report.recall) > 0.0
                  ? 2.0 * report.precision * report.recall / (report.precision + report.recall)
                  : 0.0;
  return report;
}

// ---------------------------------------------------------------------------
// 2D projection of token embeddings (PCA) for the visualization command.
// ---------------------------------------------------------------------------

struct ProjectionPoint {
  std::string token;
  double x = 0.0, y = 0.0;
  std::string gold_label;
  bool is_entity = false;
};

struct ProjectionResult {
  std::vector<ProjectionPoint> points;
  double explained_variance_ratio = 0.0;  // by the two kept components
  Eigen::Vector2d component_variance = Eigen::Vector2d::Zero();
};

/// PCA to two components via SVD of the centered token matrix. Deterministic:
/// each component's sign is fixed so its largest-magnitude entry is positive.
inline ProjectionResult project_tokens_2d(const std::vector<Sentence>& sentences,
                                          const EncoderBackend& backend, bool normalize) {
  std::vector<std::pair<std::string, std::string>> token_labels;
  std::vector<Eigen::RowVectorXd> rows;
  for (const auto& s : sentences) {
    const TokenEmbeddings emb = encode_tokens(s, backend, normalize);
    for (size_t i = 0; i < s.tokens.size(); ++i) {
      token_labels.push_back({s.tokens[i], s.labels[i]});
      rows.push_back(emb.H.row(static_cast<Eigen::Index>(i)));
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  if (n < 2) throw ProjectionError("project_tokens_2d: need at least 2 tokens");

  Eigen::MatrixXd x(n, backend.dim());
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = rows[i];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index comps = std::min<Eigen::Index>(2, svd.singularValues().size());
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(backend.dim(), 2);
  basis.leftCols(comps) = svd.matrixV().leftCols(comps);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::Index argmax = 0;
    basis.col(c).cwiseAbs().maxCoeff(&argmax);
    if (basis(argmax, c) < 0.0) basis.col(c) = -basis.col(c);
  }
  const Eigen::MatrixXd coords = centered * basis;

  ProjectionResult result;
  const double total_var = centered.squaredNorm();
  for (Eigen::Index c = 0; c < comps; ++c) {
    const double sv = svd.singularValues()[c];
    result.component_variance[c] = sv * sv / static_cast<double>(n - 1);
  }
  result.explained_variance_ratio =
      total_var > 0.0
          ? (result.component_variance.sum() * static_cast<double>(n - 1)) / total_var
          : 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    ProjectionPoint pt;
    pt.token = token_labels[i].first;
    pt.gold_label = token_labels[i].second;
    pt.is_entity = token_labels[i].second != "O";
    pt.x = coords(i, 0);
    pt.y = coords(i, 1);
    result.points.push_back(std::move(pt));
  }
  return result;
}

inline void write_projection_csv(const ProjectionResult& result, std::ostream& out) {
  out << "token,x,y,gold_label,is_entity\n";
  for (const auto& p : result.points) {
    std::string token = p.token;
    if (token.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : token) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      quoted += '"';
      token = quoted;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g", p.x, p.y);
    out << token << ',' << buf << ',' << p.gold_label << ',' << (p.is_entity ? 1 : 0) << '\n';
  }
}

/// Scatter plot as a small self-contained SVG; entity tokens get one color
/// per type, O tokens are grey.
inline void write_projection_svg(const ProjectionResult& result, const TypeCatalog& catalog,
                                 std::ostream& out) {
  const int w = 640, h = 480, margin = 40;
  double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
  if (!result.points.empty()) {
    min_x = max_x = result.points[0].x;
    min_y = max_y = result.points[0].y;
    for (const auto& p : result.points) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  }
  const double sx = (max_x > min_x) ? (w - 2.0 * margin) / (max_x - min_x) : 1.0;
  const double sy = (max_y > min_y) ? (h - 2.0 * margin) / (max_y - min_y) : 1.0;
  static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& p : result.points) {
    const double cx = margin + (p.x - min_x) * sx;
    const double cy = h - margin - (p.y - min_y) * sy;
    std::string color = "#999999";
    if (p.is_entity) {
      const int t = catalog.index_of(p.gold_label.substr(2));
      color = palette[(t < 0 ? 0 : t) % 6];
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", cx, cy,
                  color.c_str());
    out << buf;
  }
  for (int t = 0; t < catalog.size(); ++t) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%d\" cy=\"%d\" r=\"4\" fill=\"%s\"/>"
                  "<text x=\"%d\" y=\"%d\" font-size=\"12\">%s</text>\n",
                  w - 150, 20 + 16 * t, palette[t % 6], w - 140, 24 + 16 * t, catalog.names[t].c_str());
    out << buf;
  }
  out << "<circle cx=\"" << (w - 150) << "\" cy=\"" << (20 + 16 * catalog.size())
      << "\" r=\"4\" fill=\"#999999\"/><text x=\"" << (w - 140) << "\" y=\"" << (24 + 16 * catalog.size())
      << "\" font-size=\"12\">O</text>\n";
  out << "</svg>\n";
}

enum class SilhouetteScope { all_points, entity_side };

/// Silhouette with the two groups (entity vs O) as the clustering.
/// all_points averages s(i) over every row; entity_side averages over the
/// entity rows only, i.e. how far the entity tokens sit from the O cloud.
/// Points alone in their group score 0.
inline double silhouette_separation(const Eigen::MatrixXd& x, const std::vector<bool>& is_entity,
                                    SilhouetteScope scope = SilhouetteScope::all_points) {
  if (static_cast<size_t>(x.rows()) != is_entity.size())
    throw DimensionError("silhouette_separation: size mismatch");
  const Eigen::Index n = x.rows();
  long n_entity = std::count(is_entity.begin(), is_entity.end(), true);
  long n_other = n - n_entity;
  if (n_entity == 0 || n_other == 0)
    throw ValidationError("silhouette_separation: both groups must be non-empty");

  double total = 0.0;
  long counted = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (scope == SilhouetteScope::entity_side && !is_entity[i]) continue;
    ++counted;
    double same = 0.0, other = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = (x.row(i) - x.row(j)).norm();
      if (is_entity[i] == is_entity[j])
        same += d;
      else
        other += d;
    }
    const long own = is_entity[i] ? n_entity : n_other;
    const long opp = n - own;
    if (own <= 1) continue;  // silhouette of a singleton group member is 0
    const double a = same / static_cast<double>(own - 1);
    const double b = other / static_cast<double>(opp);
    const double mx = std::max(a, b);
    if (mx > 0.0) total += (b - a) / mx;
  }
  return counted > 0 ? total / static_cast<double>(counted) : 0.0;
}

// --- prediction file I/O (two-column CoNLL) ---

inline std::string predictions_to_conll(const std::vector<Sentence>& sentences,
                                        const std::vector<Prediction>& preds) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : preds) by_id[p.id] = &p;
  std::string out;
  for (size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    const auto it = by_id.find(s.id);
    if (it == by_id.end()) throw AlignmentError("predictions_to_conll: no prediction for '" + s.id + "'");
    for (size_t t = 0; t < s.tokens.size(); ++t)
      out += s.tokens[t] + "\t" + it->second->tags[t] + "\n";
    if (i + 1 < sentences.size()) out += "\n";
  }
  return out;
}

inline nlohmann::json eval_report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f1"] = report.f1;
  j["gold_entities"] = report.gold_entities;
  j["pred_entities"] = report.pred_entities;
  j["matched"] = report.matched;
  nlohmann::json per_type = nlohmann::json::object();
  for (const auto& [name, c] : report.per_type)
    per_type[name] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
  j["per_type"] = per_type;
  return j;
}

}  // namespace wprocer
