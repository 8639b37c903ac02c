#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "wprocer/common.hpp"
#include "wprocer/clustering.hpp"
#include "wprocer/encoder.hpp"

namespace wprocer {

// ---------------------------------------------------------------------------
// Weighting networks: row-softmax of a scaled similarity Gram matrix.
// ---------------------------------------------------------------------------

/// n×n row-stochastic matrix over type anchors, W1 = softmax(T·Tᵀ/√d_k).
/// w_mn lives at (row m, col n).
struct WeightMatrixW1 {
  Eigen::MatrixXd W;
  double dk = 0.0;
};

/// (n+k')×(n+k') row-stochastic matrix over [T:C]. Column blocks are ordered
/// types first, then centers; w_nv lives at (row n, col n_types+v).
struct WeightMatrixW2 {
  Eigen::MatrixXd W;
  int n_types = 0;
  int k_centers = 0;
  double dk = 0.0;
};

namespace detail {

inline Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd w(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double mx = scores.row(i).maxCoeff();
    const Eigen::ArrayXd e = (scores.row(i).array() - mx).exp();
    w.row(i) = (e / e.sum()).matrix();
  }
  return w;
}

// d(scores) for y = row_softmax(scores) given upstream d(y)
inline Eigen::MatrixXd row_softmax_backward(const Eigen::MatrixXd& y, const Eigen::MatrixXd& dy) {
  Eigen::MatrixXd ds(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double dot = y.row(i).dot(dy.row(i));
    ds.row(i) = y.row(i).cwiseProduct(dy.row(i) - Eigen::RowVectorXd::Constant(y.cols(), dot));
  }
  return ds;
}

}  // namespace detail

inline WeightMatrixW1 weighting_type(const Eigen::MatrixXd& anchors) {
  if (anchors.rows() < 1) throw ValidationError("weighting_type: need at least one anchor");
  WeightMatrixW1 w1;
  w1.dk = static_cast<double>(anchors.cols());
  const Eigen::MatrixXd scores = anchors * anchors.transpose() / std::sqrt(w1.dk);
  w1.W = detail::row_softmax(scores);
  return w1;
}

/// dT for a loss with gradient dW on the W1 entries.
inline Eigen::MatrixXd weighting_type_backward(const Eigen::MatrixXd& anchors, const WeightMatrixW1& w1,
                                               const Eigen::MatrixXd& dW) {
  const Eigen::MatrixXd ds = detail::row_softmax_backward(w1.W, dW) / std::sqrt(w1.dk);
  return (ds + ds.transpose()) * anchors;
}

inline WeightMatrixW2 weighting_proto(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& centers) {
  if (centers.rows() > 0 && centers.cols() != anchors.cols())
    throw DimensionError("weighting_proto: center dim " + std::to_string(centers.cols()) + " != anchor dim " +
                         std::to_string(anchors.cols()));
  WeightMatrixW2 w2;
  w2.n_types = static_cast<int>(anchors.rows());
  w2.k_centers = static_cast<int>(centers.rows());
  w2.dk = static_cast<double>(anchors.cols());
  Eigen::MatrixXd stacked(anchors.rows() + centers.rows(), anchors.cols());
  stacked.topRows(anchors.rows()) = anchors;
  if (centers.rows() > 0) stacked.bottomRows(centers.rows()) = centers;
  const Eigen::MatrixXd scores = stacked * stacked.transpose() / std::sqrt(w2.dk);
  w2.W = detail::row_softmax(scores);
  return w2;
}

/// dT only; the center rows are detached.
inline Eigen::MatrixXd weighting_proto_backward(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& centers,
                                                const WeightMatrixW2& w2, const Eigen::MatrixXd& dW) {
  Eigen::MatrixXd stacked(anchors.rows() + centers.rows(), anchors.cols());
  stacked.topRows(anchors.rows()) = anchors;
  if (centers.rows() > 0) stacked.bottomRows(centers.rows()) = centers;
  const Eigen::MatrixXd ds = detail::row_softmax_backward(w2.W, dW) / std::sqrt(w2.dk);
  const Eigen::MatrixXd dstacked = (ds + ds.transpose()) * stacked;
  return dstacked.topRows(anchors.rows());
}

// ---------------------------------------------------------------------------
// Type-based contrastive loss.
// ---------------------------------------------------------------------------

struct TypeLossGrad {
  Eigen::MatrixXd dT;  // n×d
  Eigen::MatrixXd dH;  // l×d
  Eigen::MatrixXd dW;  // n×n, zero unless weighted
};

/// Sum over entity tokens i (type n) of
///   -log[ exp(t_n·h_i/τ) / Σ_{m≠n} w_mn·exp(t_n·t_m/τ) ].
/// token_types[i] is the type index of token i, -1 for O. With
/// weighted=false every w_mn is 1. Zero entity tokens yield 0.
inline double loss_type(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& H,
                        const std::vector<int>& token_types, const WeightMatrixW1* w1, double tau,
                        bool weighted, TypeLossGrad* grad = nullptr) {
  if (tau <= 0.0) throw ValidationError("loss_type: tau must be > 0");
  if (static_cast<Eigen::Index>(token_types.size()) != H.rows())
    throw DimensionError("loss_type: token_types size != H rows");
  if (weighted && w1 == nullptr) throw ValidationError("loss_type: weighted form needs W1");
  const Eigen::Index n = anchors.rows();

  if (grad) {
    grad->dT = Eigen::MatrixXd::Zero(n, anchors.cols());
    grad->dH = Eigen::MatrixXd::Zero(H.rows(), H.cols());
    grad->dW = Eigen::MatrixXd::Zero(n, n);
  }

  double loss = 0.0;
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    const int t = token_types[i];
    if (t < 0) continue;
    if (t >= n) throw ValidationError("loss_type: token type index out of range");
    if (n < 2) throw DegenerateError("loss_type: denominator over m != n is empty with a single type");

    const double num = anchors.row(t).dot(H.row(i)) / tau;
    double z = 0.0;
    Eigen::VectorXd terms = Eigen::VectorXd::Zero(n);
    for (Eigen::Index m = 0; m < n; ++m) {
      if (m == t) continue;
      const double w = weighted ? w1->W(m, t) : 1.0;
      terms[m] = w * std::exp(anchors.row(t).dot(anchors.row(m)) / tau);
      z += terms[m];
    }
    loss += -num + std::log(z);

    if (grad) {
      grad->dH.row(i) -= anchors.row(t) / tau;
      grad->dT.row(t) -= H.row(i) / tau;
      for (Eigen::Index m = 0; m < n; ++m) {
        if (m == t) continue;
        const double p = terms[m] / z;
        grad->dT.row(t) += p / tau * anchors.row(m);
        grad->dT.row(m) += p / tau * anchors.row(t);
        if (weighted) grad->dW(m, t) += std::exp(anchors.row(t).dot(anchors.row(m)) / tau) / z;
      }
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Prototype-based contrastive loss.
// ---------------------------------------------------------------------------

/// Per-sentence view consumed by loss_prototype. `present_types` holds the
/// type indices appearing in the sentence's gold labels, ascending.
struct SentenceProtos {
  const Eigen::MatrixXd* centers = nullptr;
  const ProtoPartition* partition = nullptr;
  const WeightMatrixW2* w2 = nullptr;
  std::vector<int> present_types;
};

struct ProtoLossGrad {
  Eigen::MatrixXd dT;
  std::vector<Eigen::MatrixXd> dW2;  // one per sentence, empty when unused
};

/// Sum over sentences of the per-sentence average over valid anchors n of
///   -log[ Σ_{c∈P_n} exp(t_n·c/τ) / Σ_{v∈N_n} w_nv·exp(t_n·c_v/τ) ].
/// Anchors with empty P_n or N_n drop out of the average; a sentence with no
/// prototypes or no valid anchor contributes 0. Centers are detached: the
/// gradient flows through the anchors (and W2's anchor block) only.
inline double loss_prototype(const Eigen::MatrixXd& anchors, const std::vector<SentenceProtos>& sentences,
                             double tau, bool weighted, ProtoLossGrad* grad = nullptr) {
  if (tau <= 0.0) throw ValidationError("loss_prototype: tau must be > 0");
  const Eigen::Index n = anchors.rows();
  if (grad) {
    grad->dT = Eigen::MatrixXd::Zero(n, anchors.cols());
    grad->dW2.assign(sentences.size(), Eigen::MatrixXd());
  }

  double loss = 0.0;
  for (size_t s = 0; s < sentences.size(); ++s) {
    const auto& sent = sentences[s];
    if (!sent.centers || sent.centers->rows() == 0) continue;
    if (weighted && sent.w2 == nullptr) throw ValidationError("loss_prototype: weighted form needs W2");
    const Eigen::MatrixXd& c = *sent.centers;

    std::vector<int> valid;
    for (int t : sent.present_types) {
      if (t < 0 || t >= n) throw ValidationError("loss_prototype: type index out of range");
      if (!sent.partition->positives[t].empty() && !sent.partition->negatives[t].empty())
        valid.push_back(t);
    }
    if (valid.empty()) continue;

    if (grad && weighted && grad->dW2[s].size() == 0)
      grad->dW2[s] = Eigen::MatrixXd::Zero(sent.w2->W.rows(), sent.w2->W.cols());

    const double inv = 1.0 / static_cast<double>(valid.size());
    for (int t : valid) {
      double a_sum = 0.0, b_sum = 0.0;
      std::vector<double> a_terms, b_terms;
      for (int k : sent.partition->positives[t]) {
        a_terms.push_back(std::exp(anchors.row(t).dot(c.row(k)) / tau));
        a_sum += a_terms.back();
      }
      for (int v : sent.partition->negatives[t]) {
        const double w = weighted ? sent.w2->W(t, sent.w2->n_types + v) : 1.0;
        b_terms.push_back(w * std::exp(anchors.row(t).dot(c.row(v)) / tau));
        b_sum += b_terms.back();
      }
      loss += inv * (-std::log(a_sum) + std::log(b_sum));

      if (grad) {
        for (size_t idx = 0; idx < sent.partition->positives[t].size(); ++idx) {
          const int k = sent.partition->positives[t][idx];
          grad->dT.row(t) -= inv * (a_terms[idx] / a_sum) / tau * c.row(k);
        }
        for (size_t idx = 0; idx < sent.partition->negatives[t].size(); ++idx) {
          const int v = sent.partition->negatives[t][idx];
          grad->dT.row(t) += inv * (b_terms[idx] / b_sum) / tau * c.row(v);
          if (weighted)
            grad->dW2[s](t, sent.w2->n_types + v) +=
                inv * std::exp(anchors.row(t).dot(c.row(v)) / tau) / b_sum;
        }
      }
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Baseline contrastive loss (reference for the ablation).
// ---------------------------------------------------------------------------

/// Positive for one entity token: another token row or a type anchor row.
struct PositiveRef {
  enum Kind { Token, Anchor } kind = Token;
  int index = -1;
};

/// Default pairing policy: the first other same-label token in index order,
/// else the token's own type anchor.
inline std::vector<std::pair<int, PositiveRef>> default_pairing(const std::vector<int>& token_types) {
  std::vector<std::pair<int, PositiveRef>> pairing;
  for (size_t i = 0; i < token_types.size(); ++i) {
    if (token_types[i] < 0) continue;
    PositiveRef ref;
    ref.kind = PositiveRef::Anchor;
    ref.index = token_types[i];
    for (size_t j = 0; j < token_types.size(); ++j) {
      if (j != i && token_types[j] == token_types[i]) {
        ref.kind = PositiveRef::Token;
        ref.index = static_cast<int>(j);
        break;
      }
    }
    pairing.push_back({static_cast<int>(i), ref});
  }
  return pairing;
}

struct BaselineGrad {
  Eigen::MatrixXd dH;
  Eigen::MatrixXd dT;
};

/// Traditional CL: Σ_i -log[ exp(x_i·g(x_i)/τ) / Σ_{neg} exp(x_i·neg/τ) ].
/// Negatives of token i are every token with a different label (O included)
/// plus every other type's anchor.
inline double loss_baseline_cl(const Eigen::MatrixXd& H, const std::vector<int>& token_types,
                               const Eigen::MatrixXd& anchors,
                               const std::vector<std::pair<int, PositiveRef>>& pairing, double tau,
                               BaselineGrad* grad = nullptr) {
  if (tau <= 0.0) throw ValidationError("loss_baseline_cl: tau must be > 0");
  if (static_cast<Eigen::Index>(token_types.size()) != H.rows())
    throw DimensionError("loss_baseline_cl: token_types size != H rows");
  if (grad) {
    grad->dH = Eigen::MatrixXd::Zero(H.rows(), H.cols());
    grad->dT = Eigen::MatrixXd::Zero(anchors.rows(), anchors.cols());
  }

  double loss = 0.0;
  for (const auto& [i, ref] : pairing) {
    if (i < 0 || i >= H.rows() || token_types[i] < 0)
      throw PairingError("loss_baseline_cl: pairing names a non-entity token");
    const int t = token_types[i];
    Eigen::RowVectorXd pos;
    if (ref.kind == PositiveRef::Token) {
      if (ref.index < 0 || ref.index >= H.rows())
        throw PairingError("loss_baseline_cl: no available positive for token " + std::to_string(i));
      pos = H.row(ref.index);
    } else {
      if (ref.index < 0 || ref.index >= anchors.rows())
        throw PairingError("loss_baseline_cl: no available positive for token " + std::to_string(i));
      pos = anchors.row(ref.index);
    }

    std::vector<std::pair<PositiveRef::Kind, int>> negatives;
    for (Eigen::Index j = 0; j < H.rows(); ++j)
      if (token_types[j] != t) negatives.push_back({PositiveRef::Token, static_cast<int>(j)});
    for (Eigen::Index m = 0; m < anchors.rows(); ++m)
      if (m != t) negatives.push_back({PositiveRef::Anchor, static_cast<int>(m)});
    if (negatives.empty()) throw DegenerateError("loss_baseline_cl: empty negative set for token " +
                                                 std::to_string(i));

    const double num = H.row(i).dot(pos) / tau;
    double z = 0.0;
    std::vector<double> terms(negatives.size());
    for (size_t q = 0; q < negatives.size(); ++q) {
      const auto& [kind, idx] = negatives[q];
      const Eigen::RowVectorXd neg = (kind == PositiveRef::Token) ? H.row(idx) : anchors.row(idx);
      terms[q] = std::exp(H.row(i).dot(neg) / tau);
      z += terms[q];
    }
    loss += -num + std::log(z);

    if (grad) {
      grad->dH.row(i) -= pos / tau;
      if (ref.kind == PositiveRef::Token)
        grad->dH.row(ref.index) -= H.row(i) / tau;
      else
        grad->dT.row(ref.index) -= H.row(i) / tau;
      for (size_t q = 0; q < negatives.size(); ++q) {
        const auto& [kind, idx] = negatives[q];
        const double p = terms[q] / z;
        const Eigen::RowVectorXd neg = (kind == PositiveRef::Token) ? H.row(idx) : anchors.row(idx);
        grad->dH.row(i) += p / tau * neg;
        if (kind == PositiveRef::Token)
          grad->dH.row(idx) += p / tau * H.row(i);
        else
          grad->dT.row(idx) += p / tau * H.row(i);
      }
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Smoothed cross-entropy over n+1 classes (types first, O last).
// ---------------------------------------------------------------------------

/// Mean over tokens of cross-entropy against the ε-smoothed one-hot target.
inline double loss_ce_smoothed(const Eigen::MatrixXd& logits, const std::vector<int>& gold_classes,
                               double epsilon, Eigen::MatrixXd* dlogits = nullptr) {
  if (epsilon < 0.0 || epsilon >= 1.0) throw ValidationError("loss_ce_smoothed: epsilon must be in [0, 1)");
  if (static_cast<Eigen::Index>(gold_classes.size()) != logits.rows())
    throw DimensionError("loss_ce_smoothed: gold size != logits rows");
  const Eigen::Index l = logits.rows(), classes = logits.cols();
  if (l == 0) return 0.0;
  if (dlogits) *dlogits = Eigen::MatrixXd::Zero(l, classes);

  double loss = 0.0;
  for (Eigen::Index i = 0; i < l; ++i) {
    const int gold = gold_classes[i];
    if (gold < 0 || gold >= classes)
      throw ValidationError("loss_ce_smoothed: gold class " + std::to_string(gold) + " out of range");
    const double mx = logits.row(i).maxCoeff();
    const Eigen::ArrayXd shifted = logits.row(i).array() - mx;
    const double lse = std::log(shifted.exp().sum()) + mx;
    for (Eigen::Index c = 0; c < classes; ++c) {
      const double q = (c == gold ? 1.0 - epsilon : 0.0) + epsilon / static_cast<double>(classes);
      loss += q * (lse - logits(i, c));
    }
    if (dlogits) {
      const Eigen::ArrayXd p = (shifted - std::log(shifted.exp().sum())).exp();
      for (Eigen::Index c = 0; c < classes; ++c) {
        const double q = (c == gold ? 1.0 - epsilon : 0.0) + epsilon / static_cast<double>(classes);
        (*dlogits)(i, c) = (p[c] - q) / static_cast<double>(l);
      }
    }
  }
  return loss / static_cast<double>(l);
}

// ---------------------------------------------------------------------------
// Combined objective.
// ---------------------------------------------------------------------------

struct LossBreakdown {
  double ce = 0.0;
  double type_loss = 0.0;
  double prototype_loss = 0.0;
  double total = 0.0;
  double beta = 0.0;
  double tau = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

/// total = ce + β·type + (1−β)·prototype, components retained.
inline LossBreakdown loss_total(double ce, double type_loss, double prototype_loss, double beta, double tau) {
  if (beta < 0.0 || beta > 1.0) throw ValidationError("loss_total: beta must be in [0, 1]");
  if (tau <= 0.0) throw ValidationError("loss_total: tau must be > 0");
  LossBreakdown b;
  b.ce = ce;
  b.type_loss = type_loss;
  b.prototype_loss = prototype_loss;
  b.beta = beta;
  b.tau = tau;
  b.total = ce + beta * type_loss + (1.0 - beta) * prototype_loss;
  return b;
}

// ---------------------------------------------------------------------------
// Classifier head for the cross-entropy guidance.
// ---------------------------------------------------------------------------

class LinearClassifier {
 public:
  LinearClassifier(int classes, int d, uint64_t seed) {
    Rng rng(derive_seed(seed, 0xc1f));
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    w_ = Eigen::MatrixXd::NullaryExpr(classes, d, [&] { return scale * rng.normal(); });
    b_ = Eigen::VectorXd::Zero(classes);
    g_w_ = Eigen::MatrixXd::Zero(classes, d);
    g_b_ = Eigen::VectorXd::Zero(classes);
  }

  int classes() const { return static_cast<int>(w_.rows()); }
  int dim() const { return static_cast<int>(w_.cols()); }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& H) const {
    if (H.cols() != w_.cols()) throw DimensionError("LinearClassifier: input dim mismatch");
    return (H * w_.transpose()).rowwise() + b_.transpose();
  }

  /// Accumulates dW/db; returns dH.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& H, const Eigen::MatrixXd& dlogits) {
    g_w_ += dlogits.transpose() * H;
    g_b_ += dlogits.colwise().sum().transpose();
    return dlogits * w_;
  }

  std::vector<ParamRef> parameters() {
    return {
        {"classifier.w", w_.data(), g_w_.data(), w_.size(), {w_.rows(), w_.cols()}},
        {"classifier.b", b_.data(), g_b_.data(), b_.size(), {b_.size()}},
    };
  }

  void zero_grad() {
    g_w_.setZero();
    g_b_.setZero();
  }

 private:
  Eigen::MatrixXd w_, g_w_;
  Eigen::VectorXd b_, g_b_;
};

}  // namespace wprocer
