#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "wprocer/clustering.hpp"
#include "wprocer/common.hpp"
#include "wprocer/corpus.hpp"
#include "wprocer/encoder.hpp"
#include "wprocer/inference_eval.hpp"
#include "wprocer/losses.hpp"

namespace wprocer {

enum class AblationMode { full, no_weight, no_prototype, ce_only };
enum class TypeDescVariant { description, surface_name, prototypical_instances };

inline const char* ablation_mode_name(AblationMode m) {
  switch (m) {
    case AblationMode::full: return "full";
    case AblationMode::no_weight: return "no_weight";
    case AblationMode::no_prototype: return "no_prototype";
    case AblationMode::ce_only: return "ce_only";
  }
  return "full";
}

inline AblationMode parse_ablation_mode(const std::string& s) {
  if (s == "full") return AblationMode::full;
  if (s == "no_weight") return AblationMode::no_weight;
  if (s == "no_prototype") return AblationMode::no_prototype;
  if (s == "ce_only") return AblationMode::ce_only;
  throw ConfigError("unknown ablation mode '" + s + "'");
}

inline const char* type_desc_name(TypeDescVariant v) {
  switch (v) {
    case TypeDescVariant::description: return "description";
    case TypeDescVariant::surface_name: return "surface_name";
    case TypeDescVariant::prototypical_instances: return "prototypical_instances";
  }
  return "description";
}

inline TypeDescVariant parse_type_desc(const std::string& s) {
  if (s == "description") return TypeDescVariant::description;
  if (s == "surface_name") return TypeDescVariant::surface_name;
  if (s == "prototypical_instances") return TypeDescVariant::prototypical_instances;
  throw ConfigError("unknown type-description variant '" + s + "'");
}

struct TrainConfig {
  int k = 3;            // prototype cluster count
  double alpha = 0.7;   // positive/negative distance threshold
  double beta = 0.5;    // type-loss weight; prototype loss gets 1-beta
  double tau = 0.5;
  double learning_rate = 5e-5;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int steps = 300;
  int batch_size = 32;
  uint64_t seed = 1;
  double label_smoothing = 0.1;
  bool normalize = true;
  AblationMode ablation = AblationMode::full;
  TypeDescVariant type_desc = TypeDescVariant::description;
  int eval_every = 50;
  int kmeans_max_iter = 50;
  double kmeans_tol = 1e-6;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (k < 1) out.push_back("k: must be >= 1 (got " + std::to_string(k) + ")");
    if (!(alpha > 0.0 && alpha <= 2.0)) out.push_back("alpha: must be in (0, 2]");
    if (!(beta >= 0.0 && beta <= 1.0)) out.push_back("beta: must be in [0, 1]");
    if (!(tau > 0.0)) out.push_back("tau: must be > 0");
    if (!(learning_rate > 0.0)) out.push_back("learning_rate: must be > 0");
    if (weight_decay < 0.0) out.push_back("weight_decay: must be >= 0");
    if (steps < 0) out.push_back("steps: must be >= 0");
    if (batch_size < 1) out.push_back("batch_size: must be >= 1");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) out.push_back("label_smoothing: must be in [0, 1)");
    if (eval_every < 1) out.push_back("eval_every: must be >= 1");
    if (kmeans_max_iter < 1) out.push_back("kmeans_max_iter: must be >= 1");
    if (!(kmeans_tol >= 0.0)) out.push_back("kmeans_tol: must be >= 0");
    return out;
  }

  void validate() const {
    const auto bad = problems();
    if (bad.empty()) return;
    std::string msg = "invalid train config:";
    for (const auto& p : bad) msg += "\n  " + p;
    throw ConfigError(msg);
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"k", k},
                          {"alpha", alpha},
                          {"beta", beta},
                          {"tau", tau},
                          {"learning_rate", learning_rate},
                          {"weight_decay", weight_decay},
                          {"adam_beta1", adam_beta1},
                          {"adam_beta2", adam_beta2},
                          {"adam_eps", adam_eps},
                          {"steps", steps},
                          {"batch_size", batch_size},
                          {"seed", seed},
                          {"label_smoothing", label_smoothing},
                          {"normalize", normalize},
                          {"ablation", ablation_mode_name(ablation)},
                          {"type_desc", type_desc_name(type_desc)},
                          {"eval_every", eval_every},
                          {"kmeans_max_iter", kmeans_max_iter},
                          {"kmeans_tol", kmeans_tol}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.k = j.value("k", c.k);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.tau = j.value("tau", c.tau);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.label_smoothing = j.value("label_smoothing", c.label_smoothing);
    c.normalize = j.value("normalize", c.normalize);
    if (j.contains("ablation")) c.ablation = parse_ablation_mode(j.at("ablation").get<std::string>());
    if (j.contains("type_desc")) c.type_desc = parse_type_desc(j.at("type_desc").get<std::string>());
    c.eval_every = j.value("eval_every", c.eval_every);
    c.kmeans_max_iter = j.value("kmeans_max_iter", c.kmeans_max_iter);
    c.kmeans_tol = j.value("kmeans_tol", c.kmeans_tol);
    return c;
  }

  uint64_t hash() const { return fnv1a64(to_json().dump()); }
};

/// Adaptive moment estimation with decoupled weight decay.
class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1, double beta2, double eps)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<ParamRef>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Eigen::VectorXd::Zero(p.size));
        v_.push_back(Eigen::VectorXd::Zero(p.size));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      Eigen::Map<Eigen::VectorXd> value(params[i].data, params[i].size);
      Eigen::Map<const Eigen::VectorXd> grad(params[i].grad, params[i].size);
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad.cwiseProduct(grad);
      const Eigen::VectorXd m_hat = m_[i] / bc1;
      const Eigen::VectorXd v_hat = v_[i] / bc2;
      value -= lr_ * (m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
      value -= lr_ * wd_ * value;
    }
  }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Eigen::VectorXd> m_, v_;
};

struct StepRecord {
  int step = 0;
  LossBreakdown loss;
  double wall_ms = 0.0;

  bool operator==(const StepRecord& o) const { return step == o.step && loss == o.loss; }
};

struct EvalPoint {
  int step = 0;
  double f1 = 0.0;

  bool operator==(const EvalPoint&) const = default;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EvalPoint> evals;
  uint64_t config_hash = 0;

  double best_f1() const {
    double best = 0.0;
    for (const auto& e : evals) best = std::max(best, e.f1);
    return best;
  }
  double final_f1() const { return evals.empty() ? 0.0 : evals.back().f1; }

  bool operator==(const TrainHistory&) const = default;
};

/// Per-step training log as JSON lines. Wall-clock is zeroed when
/// deterministic_output is set (the SOURCE_DATE_EPOCH regime).
inline std::string history_to_jsonl(const TrainHistory& history, bool deterministic_output) {
  std::string out;
  for (const auto& r : history.steps) {
    nlohmann::json j{{"kind", "step"},
                     {"step", r.step},
                     {"ce", r.loss.ce},
                     {"type", r.loss.type_loss},
                     {"prototype", r.loss.prototype_loss},
                     {"total", r.loss.total},
                     {"beta", r.loss.beta},
                     {"tau", r.loss.tau},
                     {"config_hash", to_hex(history.config_hash)},
                     {"wall_ms", deterministic_output ? 0.0 : r.wall_ms}};
    out += j.dump() + "\n";
  }
  for (const auto& e : history.evals) {
    nlohmann::json j{{"kind", "eval"}, {"step", e.step}, {"f1", e.f1},
                     {"config_hash", to_hex(history.config_hash)}};
    out += j.dump() + "\n";
  }
  return out;
}

/// Owns the trainable projection and classifier heads; optimizes them
/// together with the backend parameters on a support set.
class Trainer {
 public:
  Trainer(TrainConfig cfg, const TypeCatalog& catalog, EncoderBackend& backend)
      : cfg_(std::move(cfg)),
        catalog_(catalog),
        backend_(&backend),
        projection_(backend.dim(), derive_seed(cfg_.seed, 0x11)),
        classifier_(catalog.size() + 1, backend.dim(), derive_seed(cfg_.seed, 0x22)),
        optimizer_(cfg_.learning_rate, cfg_.weight_decay, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps) {
    cfg_.validate();
    catalog_.validate();
    type_inputs_ = build_type_inputs(nullptr);
  }

  const TrainConfig& config() const { return cfg_; }
  const TypeCatalog& catalog() const { return catalog_; }
  EncoderBackend& backend() { return *backend_; }
  TypeProjection& projection() { return projection_; }
  const TypeProjection& projection() const { return projection_; }
  LinearClassifier& classifier() { return classifier_; }
  const LinearClassifier& classifier() const { return classifier_; }
  uint64_t config_hash() const { return cfg_.hash(); }

  std::vector<ParamRef> all_parameters() {
    std::vector<ParamRef> params = backend_->parameters();
    for (auto& p : projection_.parameters()) params.push_back(p);
    for (auto& p : classifier_.parameters()) params.push_back(p);
    return params;
  }

  void zero_grad() {
    backend_->zero_grad();
    projection_.zero_grad();
    classifier_.zero_grad();
  }

  TypeAnchors current_anchors(AnchorCache* cache = nullptr) const {
    return encode_anchor_matrix(type_inputs_, *backend_, projection_, cfg_.normalize, cache);
  }

  TrainHistory train(const SupportSet& support, const Dataset* eval_data = nullptr) {
    cfg_.validate();
    if (support.sentences.empty()) throw ValidationError("train: support set is empty");
    for (const auto& s : support.sentences) validate_sentence(s, catalog_);
    type_inputs_ = build_type_inputs(&support);

    TrainHistory history;
    history.config_hash = cfg_.hash();

    const int n_support = static_cast<int>(support.sentences.size());
    std::vector<int> order(n_support);
    for (int i = 0; i < n_support; ++i) order[i] = i;
    int cursor = 0;
    int epoch = 0;
    if (n_support > cfg_.batch_size) {
      Rng rng(derive_seed(cfg_.seed, 0xba7c4, epoch));
      rng.shuffle(order);
    }

    for (int step = 0; step < cfg_.steps; ++step) {
      std::vector<int> batch;
      if (n_support <= cfg_.batch_size) {
        batch = order;
      } else {
        for (int b = 0; b < cfg_.batch_size; ++b) {
          if (cursor == n_support) {
            cursor = 0;
            ++epoch;
            Rng rng(derive_seed(cfg_.seed, 0xba7c4, epoch));
            rng.shuffle(order);
          }
          batch.push_back(order[cursor++]);
        }
      }

      const auto t0 = std::chrono::steady_clock::now();
      const LossBreakdown loss = compute_step(support, batch, step, /*update=*/true);
      const auto t1 = std::chrono::steady_clock::now();
      StepRecord rec;
      rec.step = step + 1;
      rec.loss = loss;
      rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      history.steps.push_back(rec);

      if (eval_data && ((step + 1) % cfg_.eval_every == 0 || step + 1 == cfg_.steps)) {
        history.evals.push_back({step + 1, evaluate(*eval_data).f1});
      }
    }
    return history;
  }

  EvalReport evaluate(const Dataset& data) const {
    std::vector<Prediction> preds;
    preds.reserve(data.sentences.size());
    for (const auto& s : data.sentences)
      preds.push_back(decode(s, *backend_, classifier_, catalog_, cfg_.normalize));
    return micro_f1(preds, data.sentences, catalog_);
  }

  enum class StepMode { forward_only, grads, train };

  /// Per-sentence clustering state, capturable at a base point so finite
  /// differences see the same detached centers/partitions the backward pass
  /// treats as constants.
  struct FrozenClusters {
    std::vector<PrototypeSet> protos;
    std::vector<ProtoPartition> partitions;
  };

  LossBreakdown compute_step(const SupportSet& support, const std::vector<int>& batch, int step,
                             bool update) {
    return compute_step(support, batch, step, update ? StepMode::train : StepMode::forward_only);
  }

  /// One pass over a batch given as indices into the support set. `grads`
  /// accumulates parameter gradients without updating; `train` also applies
  /// an optimizer step.
  LossBreakdown compute_step(const SupportSet& support, const std::vector<int>& batch, int step,
                             StepMode mode, const FrozenClusters* frozen = nullptr,
                             FrozenClusters* capture = nullptr) {
    const int n = catalog_.size();
    const bool update = (mode != StepMode::forward_only);
    const bool type_weighted =
        cfg_.ablation == AblationMode::full || cfg_.ablation == AblationMode::no_prototype;
    const bool proto_weighted = cfg_.ablation == AblationMode::full;
    const bool want_type = cfg_.ablation != AblationMode::ce_only;
    const bool want_proto =
        cfg_.ablation == AblationMode::full || cfg_.ablation == AblationMode::no_weight;

    if (update) zero_grad();
    AnchorCache anchor_cache;
    const TypeAnchors anchors = current_anchors(&anchor_cache);
    if (cfg_.normalize && !anchors.normalized)
      throw ValidationError("compute_step: anchors not normalized under normalize=true");

    struct SentenceState {
      const Sentence* sentence = nullptr;
      Eigen::MatrixXd h_raw, h;
      std::vector<int> token_types;   // -1 for O
      std::vector<int> gold_classes;  // O is class n
      std::vector<int> o_rows;
      Eigen::MatrixXd dh;
      PrototypeSet protos;
      ProtoPartition partition;
      WeightMatrixW2 w2;
      std::vector<int> present_types;
    };
    std::vector<SentenceState> states(batch.size());

    long total_tokens = 0;
    for (size_t b = 0; b < batch.size(); ++b) {
      auto& st = states[b];
      st.sentence = &support.sentences[batch[b]];
      st.h_raw = backend_->forward(st.sentence->tokens);
      st.h = cfg_.normalize ? l2_normalize_rows(st.h_raw, "token embedding") : st.h_raw;
      st.dh = Eigen::MatrixXd::Zero(st.h.rows(), st.h.cols());
      for (size_t t = 0; t < st.sentence->labels.size(); ++t) {
        const auto& tag = st.sentence->labels[t];
        const int type = (tag == "O") ? -1 : catalog_.index_of(tag.substr(2));
        st.token_types.push_back(type);
        st.gold_classes.push_back(type < 0 ? n : type);
        if (type < 0) st.o_rows.push_back(static_cast<int>(t));
        if (type >= 0 && !std::count(st.present_types.begin(), st.present_types.end(), type))
          st.present_types.push_back(type);
      }
      std::sort(st.present_types.begin(), st.present_types.end());
      total_tokens += static_cast<long>(st.sentence->tokens.size());
    }

    // cross-entropy, mean over every token in the batch
    double ce = 0.0;
    for (auto& st : states) {
      const Eigen::MatrixXd logits = classifier_.forward(st.h);
      Eigen::MatrixXd dlogits;
      const double ce_s = loss_ce_smoothed(logits, st.gold_classes, cfg_.label_smoothing,
                                           update ? &dlogits : nullptr);
      const double frac = static_cast<double>(st.h.rows()) / static_cast<double>(total_tokens);
      ce += frac * ce_s;
      if (update) {
        dlogits *= frac;
        st.dh += classifier_.backward(st.h, dlogits);
      }
    }

    Eigen::MatrixXd dT = Eigen::MatrixXd::Zero(n, backend_->dim());
    const double eff_beta = (cfg_.ablation == AblationMode::no_prototype) ? 1.0 : cfg_.beta;

    // type-based contrastive loss (Eq. 6), summed over the batch's entity tokens
    double type_loss = 0.0;
    if (want_type) {
      WeightMatrixW1 w1;
      Eigen::MatrixXd dW1;
      if (type_weighted) {
        w1 = weighting_type(anchors.T);
        dW1 = Eigen::MatrixXd::Zero(n, n);
      }
      for (auto& st : states) {
        TypeLossGrad g;
        const double v = loss_type(anchors.T, st.h, st.token_types, type_weighted ? &w1 : nullptr, cfg_.tau,
                                   type_weighted, update ? &g : nullptr);
        type_loss += v;
        if (update) {
          st.dh += eff_beta * g.dH;
          dT += eff_beta * g.dT;
          if (type_weighted) dW1 += eff_beta * g.dW;
        }
        if (cfg_.ablation == AblationMode::no_weight) {
          // shadow check: the unweighted path must equal the weighted form with all weights 1
          WeightMatrixW1 ones;
          ones.dk = static_cast<double>(anchors.T.cols());
          ones.W = Eigen::MatrixXd::Ones(n, n);
          const double shadow = loss_type(anchors.T, st.h, st.token_types, &ones, cfg_.tau, true);
          if (shadow != v) throw TrainError("no_weight shadow check failed for type loss");
        }
      }
      if (update && type_weighted) dT += weighting_type_backward(anchors.T, w1, dW1);
    }

    // prototype-based contrastive loss (Eq. 7), summed over batch sentences
    double proto_loss = 0.0;
    if (want_proto) {
      std::vector<SentenceProtos> views;
      for (size_t b = 0; b < batch.size(); ++b) {
        auto& st = states[b];
        if (frozen) {
          st.protos = frozen->protos[b];
          st.partition = frozen->partitions[b];
          if (proto_weighted && !st.protos.empty()) st.w2 = weighting_proto(anchors.T, st.protos.centers);
        } else if (!st.o_rows.empty()) {
          Eigen::MatrixXd o_points(st.o_rows.size(), backend_->dim());
          for (size_t r = 0; r < st.o_rows.size(); ++r) o_points.row(r) = st.h.row(st.o_rows[r]);
          st.protos = kmeans(o_points, cfg_.k, derive_seed(cfg_.seed, 0x6b17 + step, batch[b]),
                             cfg_.kmeans_max_iter, cfg_.kmeans_tol);
          st.partition = partition_prototypes(st.protos, anchors, cfg_.alpha);
          if (proto_weighted) st.w2 = weighting_proto(anchors.T, st.protos.centers);
        }
        if (capture) {
          capture->protos.push_back(st.protos);
          capture->partitions.push_back(st.partition);
        }
        SentenceProtos view;
        view.centers = &st.protos.centers;
        view.partition = &st.partition;
        view.w2 = proto_weighted ? &st.w2 : nullptr;
        view.present_types = st.present_types;
        views.push_back(std::move(view));
      }
      ProtoLossGrad g;
      proto_loss = loss_prototype(anchors.T, views, cfg_.tau, proto_weighted, update ? &g : nullptr);
      if (update) {
        dT += (1.0 - eff_beta) * g.dT;
        if (proto_weighted) {
          for (size_t b = 0; b < batch.size(); ++b) {
            if (g.dW2[b].size() == 0) continue;
            dT += (1.0 - eff_beta) *
                  weighting_proto_backward(anchors.T, states[b].protos.centers, states[b].w2, g.dW2[b]);
          }
        }
      }
      if (cfg_.ablation == AblationMode::no_weight) {
        std::vector<WeightMatrixW2> ones_w2(batch.size());
        std::vector<SentenceProtos> shadow_views = views;
        for (size_t b = 0; b < batch.size(); ++b) {
          const Eigen::Index rows = n + states[b].protos.centers.rows();
          ones_w2[b].n_types = n;
          ones_w2[b].k_centers = static_cast<int>(states[b].protos.centers.rows());
          ones_w2[b].dk = static_cast<double>(anchors.T.cols());
          ones_w2[b].W = Eigen::MatrixXd::Ones(rows, rows);
          shadow_views[b].w2 = &ones_w2[b];
        }
        const double shadow = loss_prototype(anchors.T, shadow_views, cfg_.tau, true);
        if (shadow != proto_loss) throw TrainError("no_weight shadow check failed for prototype loss");
      }
    }

    const LossBreakdown breakdown = loss_total(ce, type_loss, proto_loss, eff_beta, cfg_.tau);
    if (!std::isfinite(breakdown.total)) {
      nlohmann::json dump;
      dump["step"] = step;
      dump["ce"] = breakdown.ce;
      dump["type"] = breakdown.type_loss;
      dump["prototype"] = breakdown.prototype_loss;
      nlohmann::json ids = nlohmann::json::array();
      for (const auto& st : states) ids.push_back(st.sentence->id);
      dump["batch"] = ids;
      throw TrainError("non-finite loss; offending batch: " + dump.dump());
    }

    if (update) {
      for (auto& st : states) {
        const Eigen::MatrixXd dh_raw =
            cfg_.normalize ? l2_normalize_rows_backward(st.h_raw, st.h, st.dh) : st.dh;
        backend_->backward(st.sentence->tokens, dh_raw);
      }
      anchors_backward(anchor_cache, anchors, dT, *backend_, projection_);
      if (mode == StepMode::train) {
        auto params = all_parameters();
        optimizer_.step(params);
      }
    }
    return breakdown;
  }

 private:
  std::vector<std::vector<std::string>> build_type_inputs(const SupportSet* support) const {
    std::vector<std::vector<std::string>> inputs;
    for (int t = 0; t < catalog_.size(); ++t) {
      switch (cfg_.type_desc) {
        case TypeDescVariant::description:
          inputs.push_back(split_ws(catalog_.descriptions[t]));
          break;
        case TypeDescVariant::surface_name:
          inputs.push_back({catalog_.names[t]});
          break;
        case TypeDescVariant::prototypical_instances: {
          std::vector<std::vector<std::string>> instances;
          if (support) {
            for (const auto& s : support->sentences)
              for (const auto& span : extract_entities(s.labels)) {
                if (span.type != catalog_.names[t]) continue;
                instances.push_back(std::vector<std::string>(s.tokens.begin() + span.begin,
                                                             s.tokens.begin() + span.end));
              }
          }
          if (instances.empty()) {
            inputs.push_back(split_ws(catalog_.descriptions[t]));
            break;
          }
          const size_t want = std::min<size_t>(
              instances.size(), static_cast<size_t>(std::max(1, support ? support->k_shot : 1)));
          std::vector<size_t> idx(instances.size());
          for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
          Rng rng(derive_seed(cfg_.seed, 0x9d7e, t));
          rng.shuffle(idx);
          std::vector<std::string> joined;
          for (size_t i = 0; i < want; ++i)
            for (const auto& tok : instances[idx[i]]) joined.push_back(tok);
          inputs.push_back(std::move(joined));
          break;
        }
      }
    }
    return inputs;
  }

  TrainConfig cfg_;
  TypeCatalog catalog_;
  EncoderBackend* backend_;
  TypeProjection projection_;
  LinearClassifier classifier_;
  AdamW optimizer_;
  std::vector<std::vector<std::string>> type_inputs_;
};

// ---------------------------------------------------------------------------
// Ablation and sweep drivers.
// ---------------------------------------------------------------------------

struct AblationRow {
  AblationMode mode;
  LossBreakdown final_loss;
  double eval_f1 = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

/// Train {full, no_weight, no_prototype} with shared seeds and report one row
/// per mode.
inline AblationReport ablate(const TrainConfig& base, const TypeCatalog& catalog,
                             const EncoderBackend& backend_init, const SupportSet& support,
                             const Dataset* eval_data) {
  AblationReport report;
  for (AblationMode mode : {AblationMode::full, AblationMode::no_weight, AblationMode::no_prototype}) {
    TrainConfig cfg = base;
    cfg.ablation = mode;
    auto backend = backend_init.clone();
    Trainer trainer(cfg, catalog, *backend);
    const TrainHistory history = trainer.train(support, eval_data);
    AblationRow row;
    row.mode = mode;
    row.final_loss = history.steps.empty() ? LossBreakdown{} : history.steps.back().loss;
    row.eval_f1 = history.final_f1();
    report.rows.push_back(row);
  }
  return report;
}

struct SweepPoint {
  int k = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double f1 = 0.0;
  LossBreakdown final_loss;
};

struct SweepReport {
  std::vector<SweepPoint> points;  // sorted by f1, descending
};

inline SweepReport sweep(const TrainConfig& base, const std::vector<int>& ks,
                         const std::vector<double>& alphas, const std::vector<double>& betas,
                         const TypeCatalog& catalog, const EncoderBackend& backend_init,
                         const SupportSet& support, const Dataset* eval_data) {
  if (ks.empty() || alphas.empty() || betas.empty())
    throw ValidationError("sweep: every grid dimension must be non-empty");
  SweepReport report;
  for (int k : ks)
    for (double alpha : alphas)
      for (double beta : betas) {
        TrainConfig cfg = base;
        cfg.k = k;
        cfg.alpha = alpha;
        cfg.beta = beta;
        auto backend = backend_init.clone();
        Trainer trainer(cfg, catalog, *backend);
        const TrainHistory history = trainer.train(support, eval_data);
        SweepPoint pt;
        pt.k = k;
        pt.alpha = alpha;
        pt.beta = beta;
        pt.f1 = history.final_f1();
        pt.final_loss = history.steps.empty() ? LossBreakdown{} : history.steps.back().loss;
        report.points.push_back(pt);
      }
  std::stable_sort(report.points.begin(), report.points.end(),
                   [](const SweepPoint& a, const SweepPoint& b) { return a.f1 > b.f1; });
  return report;
}

}  // namespace wprocer
