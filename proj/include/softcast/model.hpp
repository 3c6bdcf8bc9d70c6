#pragma once

// Soft-token embedding and a GPT-style causal transformer with hand-written
// reverse-mode gradients.
//
// Architecture: e_t = E^T p_t, plus a learned absolute position row; then
// n_layers pre-LayerNorm blocks (multi-head causal self-attention, GELU MLP
// of width ff_mult*d); final LayerNorm; a d->V output head with bias.
//
// The forward pass runs position by position, so an autoregressive rollout
// can feed each predicted distribution back in as the next input
// (push_feedback). Because every computation at position t reads only
// positions <= t, gradients can be swept back in reverse position order and
// routed through the fed-back distributions into earlier logits.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace softcast {

struct ModelConfig {
  int V = 64;
  int d = 64;
  int n_layers = 2;
  int n_heads = 2;
  int max_len = 512;
  int ff_mult = 4;
};

/// Throws ConfigError on inconsistent shapes (d % n_heads != 0, V < 4, ...).
void validate(const ModelConfig& cfg);

enum class ParamFamily { Embedding, Positional, Attention, FeedForward, LayerNorm, Head };
std::string_view family_name(ParamFamily f);

template <class S>
struct Tensor {
  std::string name;
  ParamFamily family = ParamFamily::Embedding;
  std::vector<std::size_t> shape;
  std::vector<S> data;

  std::size_t size() const { return data.size(); }
};

/// Parameter set (and, with identical shapes, gradient buffers).
template <class S>
class ModelParams {
 public:
  struct LayerIndex {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  ModelParams() = default;
  /// All tensors zero, LayerNorm gains included.
  explicit ModelParams(const ModelConfig& cfg);

  /// Random init: N(0, 0.02*scale) weights, N(0, 0.01*scale) positions,
  /// residual output projections additionally divided by sqrt(2*n_layers),
  /// zero biases, unit LayerNorm gains.
  static ModelParams initialized(const ModelConfig& cfg, std::uint64_t seed, double scale = 1.0);

  ModelParams zeros_like() const { return ModelParams(cfg_); }

  const ModelConfig& config() const { return cfg_; }
  std::vector<Tensor<S>>& tensors() { return tensors_; }
  const std::vector<Tensor<S>>& tensors() const { return tensors_; }
  const Tensor<S>* find(std::string_view name) const;

  std::size_t parameter_count() const;
  void set_zero();
  bool all_finite() const;
  bool same_shapes(const ModelParams& other) const;

  /// Monotone counter bumped by optimizers after in-place updates; forward
  /// passes record it to detect stale caches.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  S* data(std::size_t idx) { return tensors_[idx].data.data(); }
  const S* data(std::size_t idx) const { return tensors_[idx].data.data(); }

  const LayerIndex& layer(int l) const { return layers_[static_cast<std::size_t>(l)]; }
  std::size_t token_embedding() const { return tok_emb_; }
  std::size_t positional() const { return pos_emb_; }
  std::size_t final_ln_gain() const { return lnf_g_; }
  std::size_t final_ln_bias() const { return lnf_b_; }
  std::size_t head_weight() const { return head_w_; }
  std::size_t head_bias() const { return head_b_; }

 private:
  std::size_t add(std::string name, ParamFamily family, std::vector<std::size_t> shape);

  ModelConfig cfg_;
  std::vector<Tensor<S>> tensors_;
  std::vector<LayerIndex> layers_;
  std::size_t tok_emb_ = 0, pos_emb_ = 0, lnf_g_ = 0, lnf_b_ = 0, head_w_ = 0, head_b_ = 0;
  std::uint64_t version_ = 0;
};

template <class To, class From>
ModelParams<To> cast_params(const ModelParams<From>& src) {
  ModelParams<To> out(src.config());
  for (std::size_t i = 0; i < src.tensors().size(); ++i) {
    const auto& from = src.tensors()[i].data;
    auto& to = out.tensors()[i].data;
    for (std::size_t j = 0; j < from.size(); ++j) to[j] = static_cast<To>(from[j]);
  }
  return out;
}

/// e = E^T p (weighted average of embedding rows).
template <class S>
std::vector<S> soft_embed(std::span<const S> p, const ModelParams<S>& params);

template <class S>
struct BackwardResult {
  /// Per-position logit gradients after adding the contribution that flows
  /// back through fed-back distributions (n x V).
  std::vector<S> d_logits_total;
  /// Gradient w.r.t. the input embedding at each position (n x d).
  std::vector<S> d_embeddings;
  /// Gradient w.r.t. the input distribution at each position (n x V); zero
  /// rows for positions fed a raw embedding.
  std::vector<S> d_inputs;
};

/// Incremental causal forward pass holding the activation cache.
template <class S>
class ForwardPass {
 public:
  explicit ForwardPass(const ModelParams<S>& params);

  std::size_t size() const { return n_; }
  int vocab() const { return V_; }
  int width() const { return d_; }

  /// Appends a raw input embedding (length d).
  void push_embedding(std::span<const S> e);
  /// Appends a soft token; the embedding is E^T p.
  void push_distribution(std::span<const S> p);
  /// Appends a one-hot token.
  void push_token(int token);
  /// Appends the distribution predicted at the last position as the next
  /// input. Backward routes the input gradient into that position's logits.
  void push_feedback();

  std::span<const S> logits(std::size_t t) const;
  std::span<const S> probs(std::size_t t) const;
  std::span<const S> input_embedding(std::size_t t) const;

  /// Reverse sweep. `d_logits` holds dLoss/dz for every position (n x V,
  /// row-major). Parameter gradients are accumulated (+=) into `grads`.
  BackwardResult<S> backward(std::span<const S> d_logits, ModelParams<S>& grads) const;
  /// Same, returning fresh gradient buffers.
  ModelParams<S> backward(std::span<const S> d_logits) const;

 private:
  enum class InputKind { Embedding, Distribution, Feedback };

  struct LayerCache {
    std::vector<S> xhat1, rstd1, a, q, k, v, att, concat, xhat2, rstd2, b, u, g;
  };

  void push(std::span<const S> e, InputKind kind);

  const ModelParams<S>* params_;
  std::uint64_t version_;
  int V_, d_, H_, ff_;
  std::size_t n_ = 0;
  std::vector<InputKind> kinds_;
  std::vector<S> inputs_;  // n x V source distributions (zeros for raw embeddings)
  std::vector<S> emb_;     // n x d input embeddings
  std::vector<LayerCache> layers_;
  std::vector<S> xhatf_, rstdf_, hf_, logits_, probs_;
};

/// Forward over a full sequence of embeddings.
template <class S>
ForwardPass<S> forward(const ModelParams<S>& params, std::span<const std::vector<S>> embeddings);

/// Next-step distribution for a history of soft tokens:
/// last(forward(map(soft_embed, history))).
template <class S>
std::vector<S> step_autoregressive(const ModelParams<S>& params,
                                   std::span<const std::vector<S>> history);

/// Numerically stable in-place softmax.
template <class S>
void softmax_inplace(std::span<S> z);

/// -log softmax(z)[target], computed with max-subtraction.
template <class S>
double cross_entropy(std::span<const S> logits, int target);

}  // namespace softcast
