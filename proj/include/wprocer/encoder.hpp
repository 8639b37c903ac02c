#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "wprocer/common.hpp"
#include "wprocer/corpus.hpp"

namespace wprocer {

/// Row i holds the contextual embedding of token i.
struct TokenEmbeddings {
  Eigen::MatrixXd H;
  bool normalized = false;
};

/// Row n holds the anchor embedding of type n, in catalog order.
struct TypeAnchors {
  Eigen::MatrixXd T;
  bool normalized = false;
};

/// Named view of one trainable tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  double* data = nullptr;
  double* grad = nullptr;
  Eigen::Index size = 0;
  std::vector<Eigen::Index> shape;
};

inline Eigen::MatrixXd l2_normalize_rows(const Eigen::MatrixXd& x, const char* what = "embedding") {
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    if (norm < 1e-12)
      throw DegenerateError(std::string("l2_normalize_rows: degenerate ") + what + " (near-zero norm) at row " +
                            std::to_string(i));
    y.row(i) = x.row(i) / norm;
  }
  return y;
}

/// d(raw) given y = raw/||raw|| and upstream d(y).
inline Eigen::MatrixXd l2_normalize_rows_backward(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& y,
                                                  const Eigen::MatrixXd& dy) {
  Eigen::MatrixXd dx(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double norm = raw.row(i).norm();
    const double dot = y.row(i).dot(dy.row(i));
    dx.row(i) = (dy.row(i) - dot * y.row(i)) / norm;
  }
  return dx;
}

/// Word index → first-sub-token index map for sub-token backends. The toy
/// backend is word-level, so its alignment is the identity.
struct TokenAlignment {
  std::vector<int> first_subtoken;
};

class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual const std::string& name() const = 0;
  virtual int dim() const = 0;

  /// One row per input token; deterministic given parameters and input.
  virtual Eigen::MatrixXd forward(const std::vector<std::string>& tokens) const = 0;

  /// Accumulate parameter gradients for d(loss)/d(forward output).
  virtual void backward(const std::vector<std::string>& tokens, const Eigen::MatrixXd& grad_out) = 0;

  virtual std::vector<ParamRef> parameters() = 0;
  virtual std::unique_ptr<EncoderBackend> clone() const = 0;

  virtual TokenAlignment token_alignment(const std::vector<std::string>& tokens) const {
    TokenAlignment a;
    a.first_subtoken.resize(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) a.first_subtoken[i] = static_cast<int>(i);
    return a;
  }

  void zero_grad() {
    for (auto& p : parameters()) std::fill(p.grad, p.grad + p.size, 0.0);
  }
};

/// Embedding table plus one context-mixing layer over the zero-padded ±1
/// window: h_i = tanh(Wl·e_{i-1} + Ws·e_i + Wr·e_{i+1} + b). A single-token
/// sentence reduces to tanh(Ws·e + b). The neighbour maps start weaker than
/// the self map (context_scale) so the token itself dominates early.
class ToyBackend final : public EncoderBackend {
 public:
  ToyBackend(int vocab_size, int d, uint64_t seed, double context_scale = 0.35)
      : name_("toy"), vocab_size_(vocab_size), d_(d), seed_(seed) {
    if (vocab_size < 1 || d < 1) throw ValidationError("ToyBackend: vocab_size and d must be >= 1");
    Rng rng(derive_seed(seed, 0x70f));
    embed_ = Eigen::MatrixXd::NullaryExpr(vocab_size, d, [&] { return rng.normal(); });
    const double scale = 1.0 / std::sqrt(3.0 * d);
    wl_ = Eigen::MatrixXd::NullaryExpr(d, d, [&] { return context_scale * scale * rng.normal(); });
    ws_ = Eigen::MatrixXd::NullaryExpr(d, d, [&] { return scale * rng.normal(); });
    wr_ = Eigen::MatrixXd::NullaryExpr(d, d, [&] { return context_scale * scale * rng.normal(); });
    bias_ = Eigen::VectorXd::Zero(d);
    alloc_grads();
  }

  const std::string& name() const override { return name_; }
  int dim() const override { return d_; }
  int vocab_size() const { return vocab_size_; }
  uint64_t seed() const { return seed_; }

  int token_id(const std::string& token) const {
    return static_cast<int>(fnv1a64(token) % static_cast<uint64_t>(vocab_size_));
  }

  Eigen::MatrixXd forward(const std::vector<std::string>& tokens) const override {
    if (tokens.empty()) throw EncodingError("ToyBackend: empty token sequence");
    const Eigen::Index l = static_cast<Eigen::Index>(tokens.size());
    Eigen::MatrixXd e(l, d_);
    for (Eigen::Index i = 0; i < l; ++i) e.row(i) = embed_.row(token_id(tokens[i]));
    Eigen::MatrixXd h(l, d_);
    for (Eigen::Index i = 0; i < l; ++i) {
      Eigen::VectorXd a = ws_ * e.row(i).transpose() + bias_;
      if (i > 0) a += wl_ * e.row(i - 1).transpose();
      if (i + 1 < l) a += wr_ * e.row(i + 1).transpose();
      h.row(i) = a.array().tanh().matrix().transpose();
    }
    return h;
  }

  void backward(const std::vector<std::string>& tokens, const Eigen::MatrixXd& grad_out) override {
    const Eigen::Index l = static_cast<Eigen::Index>(tokens.size());
    if (grad_out.rows() != l || grad_out.cols() != d_)
      throw DimensionError("ToyBackend::backward: grad shape mismatch");
    Eigen::MatrixXd e(l, d_);
    std::vector<int> ids(tokens.size());
    for (Eigen::Index i = 0; i < l; ++i) {
      ids[i] = token_id(tokens[i]);
      e.row(i) = embed_.row(ids[i]);
    }
    const Eigen::MatrixXd h = forward(tokens);
    for (Eigen::Index i = 0; i < l; ++i) {
      // through tanh
      const Eigen::VectorXd da =
          (grad_out.row(i).array() * (1.0 - h.row(i).array().square())).matrix().transpose();
      g_bias_ += da;
      g_ws_ += da * e.row(i);
      g_embed_.row(ids[i]) += (ws_.transpose() * da).transpose();
      if (i > 0) {
        g_wl_ += da * e.row(i - 1);
        g_embed_.row(ids[i - 1]) += (wl_.transpose() * da).transpose();
      }
      if (i + 1 < l) {
        g_wr_ += da * e.row(i + 1);
        g_embed_.row(ids[i + 1]) += (wr_.transpose() * da).transpose();
      }
    }
  }

  std::vector<ParamRef> parameters() override {
    return {
        {"toy.embed", embed_.data(), g_embed_.data(), embed_.size(), {embed_.rows(), embed_.cols()}},
        {"toy.wl", wl_.data(), g_wl_.data(), wl_.size(), {wl_.rows(), wl_.cols()}},
        {"toy.ws", ws_.data(), g_ws_.data(), ws_.size(), {ws_.rows(), ws_.cols()}},
        {"toy.wr", wr_.data(), g_wr_.data(), wr_.size(), {wr_.rows(), wr_.cols()}},
        {"toy.bias", bias_.data(), g_bias_.data(), bias_.size(), {bias_.size()}},
    };
  }

  std::unique_ptr<EncoderBackend> clone() const override { return std::make_unique<ToyBackend>(*this); }

 private:
  void alloc_grads() {
    g_embed_ = Eigen::MatrixXd::Zero(vocab_size_, d_);
    g_wl_ = Eigen::MatrixXd::Zero(d_, d_);
    g_ws_ = Eigen::MatrixXd::Zero(d_, d_);
    g_wr_ = Eigen::MatrixXd::Zero(d_, d_);
    g_bias_ = Eigen::VectorXd::Zero(d_);
  }

  std::string name_;
  int vocab_size_;
  int d_;
  uint64_t seed_;
  Eigen::MatrixXd embed_, wl_, ws_, wr_;
  Eigen::VectorXd bias_;
  Eigen::MatrixXd g_embed_, g_wl_, g_ws_, g_wr_;
  Eigen::VectorXd g_bias_;
};

/// Encode one sentence (Eq. of the token encoder). Wraps backend failures
/// with the sentence id.
inline TokenEmbeddings encode_tokens(const Sentence& sentence, const EncoderBackend& backend, bool normalize) {
  if (sentence.tokens.empty()) throw ValidationError("encode_tokens: empty sentence '" + sentence.id + "'");
  TokenEmbeddings out;
  try {
    out.H = backend.forward(sentence.tokens);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw EncodingError("encode_tokens: backend failed on sentence '" + sentence.id + "': " + e.what());
  }
  if (normalize) {
    out.H = l2_normalize_rows(out.H, "token embedding");
    out.normalized = true;
  }
  return out;
}

/// Trainable square map applied to pooled type-description embeddings.
/// Initialized as identity plus small Gaussian noise so the anchor geometry
/// starts near the backend's.
class TypeProjection {
 public:
  TypeProjection(int d, uint64_t seed) {
    Rng rng(derive_seed(seed, 0x9e0));
    p_ = Eigen::MatrixXd::Identity(d, d) +
         Eigen::MatrixXd::NullaryExpr(d, d, [&] { return 0.01 * rng.normal(); });
    g_p_ = Eigen::MatrixXd::Zero(d, d);
  }

  int dim() const { return static_cast<int>(p_.rows()); }
  const Eigen::MatrixXd& matrix() const { return p_; }
  Eigen::MatrixXd& matrix() { return p_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& pooled) const {
    if (pooled.size() != p_.cols()) throw DimensionError("TypeProjection: dimension mismatch");
    return p_ * pooled;
  }

  /// Accumulates dP; returns d(pooled).
  Eigen::VectorXd backward(const Eigen::VectorXd& pooled, const Eigen::VectorXd& dout) {
    g_p_ += dout * pooled.transpose();
    return p_.transpose() * dout;
  }

  std::vector<ParamRef> parameters() {
    return {{"projection.p", p_.data(), g_p_.data(), p_.size(), {p_.rows(), p_.cols()}}};
  }

  void zero_grad() { g_p_.setZero(); }

 private:
  Eigen::MatrixXd p_, g_p_;
};

/// Anchor vector for one type description: mean-pool the backend's hidden
/// states, apply the projection, optionally normalize.
inline Eigen::VectorXd encode_type(const std::vector<std::string>& description_tokens,
                                   const EncoderBackend& backend, const TypeProjection& projection,
                                   bool normalize) {
  if (description_tokens.empty()) throw ValidationError("encode_type: empty description");
  const Eigen::MatrixXd rows = backend.forward(description_tokens);
  const Eigen::VectorXd pooled = rows.colwise().mean().transpose();
  Eigen::VectorXd anchor = projection.apply(pooled);
  if (normalize) {
    const double norm = anchor.norm();
    if (norm < 1e-12) throw DegenerateError("encode_type: degenerate anchor (near-zero norm)");
    anchor /= norm;
  }
  return anchor;
}

inline Eigen::VectorXd encode_type(const std::string& description, const EncoderBackend& backend,
                                   const TypeProjection& projection, bool normalize) {
  return encode_type(split_ws(description), backend, projection, normalize);
}

/// Cached intermediates for backpropagation through the anchor path.
struct AnchorCache {
  std::vector<std::vector<std::string>> inputs;  // token sequence per type
  Eigen::MatrixXd pooled;                        // n×d mean-pooled backend outputs
  Eigen::MatrixXd raw;                           // n×d pre-normalization anchors
};

inline TypeAnchors encode_anchor_matrix(const std::vector<std::vector<std::string>>& type_inputs,
                                        const EncoderBackend& backend, const TypeProjection& projection,
                                        bool normalize, AnchorCache* cache = nullptr) {
  const int n = static_cast<int>(type_inputs.size());
  const int d = backend.dim();
  Eigen::MatrixXd pooled(n, d), raw(n, d);
  for (int t = 0; t < n; ++t) {
    if (type_inputs[t].empty()) throw ValidationError("encode_anchor_matrix: empty input for type row " +
                                                      std::to_string(t));
    const Eigen::MatrixXd rows = backend.forward(type_inputs[t]);
    pooled.row(t) = rows.colwise().mean();
    raw.row(t) = (projection.matrix() * pooled.row(t).transpose()).transpose();
  }
  TypeAnchors anchors;
  anchors.T = normalize ? l2_normalize_rows(raw, "type anchor") : raw;
  anchors.normalized = normalize;
  if (cache) {
    cache->inputs = type_inputs;
    cache->pooled = pooled;
    cache->raw = raw;
  }
  return anchors;
}

/// Push d(anchors.T) back into the projection and backend parameters.
inline void anchors_backward(const AnchorCache& cache, const TypeAnchors& anchors, const Eigen::MatrixXd& dT,
                             EncoderBackend& backend, TypeProjection& projection) {
  const Eigen::MatrixXd draw =
      anchors.normalized ? l2_normalize_rows_backward(cache.raw, anchors.T, dT) : dT;
  for (int t = 0; t < static_cast<int>(cache.inputs.size()); ++t) {
    const Eigen::VectorXd dpooled =
        projection.backward(cache.pooled.row(t).transpose(), draw.row(t).transpose());
    const auto& tokens = cache.inputs[t];
    const double inv_len = 1.0 / static_cast<double>(tokens.size());
    Eigen::MatrixXd drows(tokens.size(), dpooled.size());
    for (Eigen::Index r = 0; r < drows.rows(); ++r) drows.row(r) = inv_len * dpooled.transpose();
    backend.backward(tokens, drows);
  }
}

// --- backend registry ---

using BackendFactory = std::function<std::unique_ptr<EncoderBackend>(const nlohmann::json&)>;

inline std::map<std::string, BackendFactory>& backend_registry() {
  static std::map<std::string, BackendFactory> registry = {
      {"toy", [](const nlohmann::json& cfg) -> std::unique_ptr<EncoderBackend> {
         return std::make_unique<ToyBackend>(cfg.value("vocab_size", 4096), cfg.value("dim", 32),
                                             cfg.value("seed", uint64_t{1}),
                                             cfg.value("context_scale", 0.35));
       }},
  };
  return registry;
}

inline std::unique_ptr<EncoderBackend> make_backend(const nlohmann::json& cfg) {
  const std::string name = cfg.value("name", "toy");
  const auto& registry = backend_registry();
  const auto it = registry.find(name);
  if (it == registry.end()) throw ConfigError("unknown backend '" + name + "'");
  return it->second(cfg);
}

// --- flat tensor archive (JSON with shape metadata) ---

inline nlohmann::json params_to_json(const std::vector<ParamRef>& params) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : params) {
    nlohmann::json t;
    t["name"] = p.name;
    t["shape"] = p.shape;
    t["data"] = std::vector<double>(p.data, p.data + p.size);
    tensors.push_back(std::move(t));
  }
  return tensors;
}

inline void params_from_json(const nlohmann::json& tensors, std::vector<ParamRef> params) {
  if (!tensors.is_array() || tensors.size() != params.size())
    throw CheckpointError("tensor archive: expected " + std::to_string(params.size()) + " tensors");
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != params[i].name)
      throw CheckpointError("tensor archive: name mismatch, expected '" + params[i].name + "', got '" +
                            t.at("name").get<std::string>() + "'");
    const auto data = t.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != params[i].size)
      throw CheckpointError("tensor archive: size mismatch for '" + params[i].name + "'");
    std::copy(data.begin(), data.end(), params[i].data);
  }
}

inline void save_checkpoint(const std::string& path, const std::vector<ParamRef>& params,
                            const nlohmann::json& meta) {
  nlohmann::json j;
  j["format"] = "wprocer-tensors-v1";
  j["meta"] = meta;
  j["tensors"] = params_to_json(params);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << j.dump(2) << '\n';
}

inline nlohmann::json load_checkpoint(const std::string& path, std::vector<ParamRef> params) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint '" + path + "': " + e.what());
  }
  if (j.value("format", "") != "wprocer-tensors-v1")
    throw CheckpointError("checkpoint '" + path + "': unknown format");
  params_from_json(j.at("tensors"), std::move(params));
  return j.value("meta", nlohmann::json::object());
}

}  // namespace wprocer
