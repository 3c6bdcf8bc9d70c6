#include "softcast/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "softcast/error.hpp"
#include "softcast/kernels.hpp"
#include "softcast/random.hpp"

namespace softcast {

namespace {

constexpr double kLayerNormEps = 1e-5;

template <class S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * S(std::numbers::sqrt2 / 2.0)));
}

template <class S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x * S(std::numbers::sqrt2 / 2.0)));
  const S pdf = std::exp(S(-0.5) * x * x) * S(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return cdf + x * pdf;
}

// y = g * xhat + b; stores xhat and 1/sigma.
template <class S>
void layer_norm(const S* x, const S* g, const S* b, S* xhat, S* rstd, S* y, int d) {
  S mean = 0;
  for (int i = 0; i < d; ++i) mean += x[i];
  mean /= S(d);
  S var = 0;
  for (int i = 0; i < d; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= S(d);
  const S r = S(1) / std::sqrt(var + S(kLayerNormEps));
  *rstd = r;
  for (int i = 0; i < d; ++i) {
    xhat[i] = (x[i] - mean) * r;
    y[i] = g[i] * xhat[i] + b[i];
  }
}

// dx += LayerNorm backward; dg, db accumulated.
template <class S>
void layer_norm_backward(const S* dy, const S* g, const S* xhat, S rstd, S* dg, S* db, S* dx,
                         int d, S* scratch) {
  S mean_dxhat = 0, mean_dxhat_xhat = 0;
  for (int i = 0; i < d; ++i) {
    dg[i] += dy[i] * xhat[i];
    db[i] += dy[i];
    scratch[i] = dy[i] * g[i];
    mean_dxhat += scratch[i];
    mean_dxhat_xhat += scratch[i] * xhat[i];
  }
  mean_dxhat /= S(d);
  mean_dxhat_xhat /= S(d);
  for (int i = 0; i < d; ++i) dx[i] += rstd * (scratch[i] - mean_dxhat - xhat[i] * mean_dxhat_xhat);
}

template <class S>
void append_zeros(std::vector<S>& v, std::size_t n) {
  v.resize(v.size() + n, S(0));
}

}  // namespace

void validate(const ModelConfig& cfg) {
  if (cfg.V < 4) throw ConfigError("model V must be >= 4");
  if (cfg.d < 1) throw ConfigError("model width d must be >= 1");
  if (cfg.n_layers < 1) throw ConfigError("n_layers must be >= 1");
  if (cfg.n_heads < 1 || cfg.d % cfg.n_heads != 0)
    throw ConfigError("n_heads must divide d (d=" + std::to_string(cfg.d) +
                      ", n_heads=" + std::to_string(cfg.n_heads) + ")");
  if (cfg.max_len < 1) throw ConfigError("max_len must be >= 1");
  if (cfg.ff_mult < 1) throw ConfigError("ff_mult must be >= 1");
}

std::string_view family_name(ParamFamily f) {
  switch (f) {
    case ParamFamily::Embedding:
      return "embedding";
    case ParamFamily::Positional:
      return "positional";
    case ParamFamily::Attention:
      return "attention";
    case ParamFamily::FeedForward:
      return "feed-forward";
    case ParamFamily::LayerNorm:
      return "layer-norm";
    case ParamFamily::Head:
      return "head";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ModelParams

template <class S>
std::size_t ModelParams<S>::add(std::string name, ParamFamily family,
                                std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  tensors_.push_back({std::move(name), family, std::move(shape), std::vector<S>(n, S(0))});
  return tensors_.size() - 1;
}

template <class S>
ModelParams<S>::ModelParams(const ModelConfig& cfg) : cfg_(cfg) {
  validate(cfg);
  const auto V = static_cast<std::size_t>(cfg.V);
  const auto d = static_cast<std::size_t>(cfg.d);
  const auto ff = d * static_cast<std::size_t>(cfg.ff_mult);
  tok_emb_ = add("tok_emb", ParamFamily::Embedding, {V, d});
  pos_emb_ = add("pos_emb", ParamFamily::Positional, {static_cast<std::size_t>(cfg.max_len), d});
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerIndex li{};
    li.ln1_g = add(p + "ln1.gain", ParamFamily::LayerNorm, {d});
    li.ln1_b = add(p + "ln1.bias", ParamFamily::LayerNorm, {d});
    li.wq = add(p + "attn.wq", ParamFamily::Attention, {d, d});
    li.bq = add(p + "attn.bq", ParamFamily::Attention, {d});
    li.wk = add(p + "attn.wk", ParamFamily::Attention, {d, d});
    li.bk = add(p + "attn.bk", ParamFamily::Attention, {d});
    li.wv = add(p + "attn.wv", ParamFamily::Attention, {d, d});
    li.bv = add(p + "attn.bv", ParamFamily::Attention, {d});
    li.wo = add(p + "attn.wo", ParamFamily::Attention, {d, d});
    li.bo = add(p + "attn.bo", ParamFamily::Attention, {d});
    li.ln2_g = add(p + "ln2.gain", ParamFamily::LayerNorm, {d});
    li.ln2_b = add(p + "ln2.bias", ParamFamily::LayerNorm, {d});
    li.w1 = add(p + "ff.w1", ParamFamily::FeedForward, {ff, d});
    li.b1 = add(p + "ff.b1", ParamFamily::FeedForward, {ff});
    li.w2 = add(p + "ff.w2", ParamFamily::FeedForward, {d, ff});
    li.b2 = add(p + "ff.b2", ParamFamily::FeedForward, {d});
    layers_.push_back(li);
  }
  lnf_g_ = add("lnf.gain", ParamFamily::LayerNorm, {d});
  lnf_b_ = add("lnf.bias", ParamFamily::LayerNorm, {d});
  head_w_ = add("head.weight", ParamFamily::Head, {V, d});
  head_b_ = add("head.bias", ParamFamily::Head, {V});
}

template <class S>
ModelParams<S> ModelParams<S>::initialized(const ModelConfig& cfg, std::uint64_t seed,
                                           double scale) {
  ModelParams p(cfg);
  Rng rng(seed);
  const double residual_scale = 1.0 / std::sqrt(2.0 * cfg.n_layers);
  auto fill = [&](std::size_t idx, double stddev) {
    for (auto& x : p.tensors_[idx].data) x = static_cast<S>(rng.normal(0.0, stddev * scale));
  };
  auto ones = [&](std::size_t idx) {
    for (auto& x : p.tensors_[idx].data) x = S(1);
  };
  fill(p.tok_emb_, 0.02);
  fill(p.pos_emb_, 0.01);
  for (const auto& li : p.layers_) {
    ones(li.ln1_g);
    ones(li.ln2_g);
    fill(li.wq, 0.02);
    fill(li.wk, 0.02);
    fill(li.wv, 0.02);
    fill(li.wo, 0.02 * residual_scale);
    fill(li.w1, 0.02);
    fill(li.w2, 0.02 * residual_scale);
  }
  ones(p.lnf_g_);
  fill(p.head_w_, 0.02);
  return p;
}

template <class S>
const Tensor<S>* ModelParams<S>::find(std::string_view name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return &t;
  return nullptr;
}

template <class S>
std::size_t ModelParams<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

template <class S>
void ModelParams<S>::set_zero() {
  for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), S(0));
}

template <class S>
bool ModelParams<S>::all_finite() const {
  for (const auto& t : tensors_)
    for (S x : t.data)
      if (!std::isfinite(x)) return false;
  return true;
}

template <class S>
bool ModelParams<S>::same_shapes(const ModelParams& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].shape != other.tensors_[i].shape || tensors_[i].name != other.tensors_[i].name)
      return false;
  return true;
}

// ---------------------------------------------------------------------------
// Softmax / CE / soft embedding

template <class S>
void softmax_inplace(std::span<S> z) {
  const S m = *std::max_element(z.begin(), z.end());
  S sum = 0;
  for (auto& x : z) {
    x = std::exp(x - m);
    sum += x;
  }
  for (auto& x : z) x /= sum;
}

template <class S>
double cross_entropy(std::span<const S> logits, int target) {
  double m = -std::numeric_limits<double>::infinity();
  for (S x : logits) m = std::max(m, static_cast<double>(x));
  double sum = 0.0;
  for (S x : logits) sum += std::exp(static_cast<double>(x) - m);
  return m + std::log(sum) - static_cast<double>(logits[static_cast<std::size_t>(target)]);
}

template <class S>
std::vector<S> soft_embed(std::span<const S> p, const ModelParams<S>& params) {
  const auto& cfg = params.config();
  if (p.size() != static_cast<std::size_t>(cfg.V))
    throw ContractViolation("soft_embed: distribution has " + std::to_string(p.size()) +
                            " entries, expected V=" + std::to_string(cfg.V));
  std::vector<S> e(static_cast<std::size_t>(cfg.d), S(0));
  const S* E = params.data(params.token_embedding());
  for (int v = 0; v < cfg.V; ++v)
    if (p[static_cast<std::size_t>(v)] != S(0))
      kernels::axpy(p[static_cast<std::size_t>(v)], E + static_cast<std::size_t>(v) * cfg.d,
                    e.data(), static_cast<std::size_t>(cfg.d));
  return e;
}

// ---------------------------------------------------------------------------
// ForwardPass

template <class S>
ForwardPass<S>::ForwardPass(const ModelParams<S>& params)
    : params_(&params),
      version_(params.version()),
      V_(params.config().V),
      d_(params.config().d),
      H_(params.config().n_heads),
      ff_(params.config().d * params.config().ff_mult),
      layers_(static_cast<std::size_t>(params.config().n_layers)) {}

template <class S>
std::span<const S> ForwardPass<S>::logits(std::size_t t) const {
  if (t >= n_) throw ContractViolation("logits: position out of range");
  return {logits_.data() + t * V_, static_cast<std::size_t>(V_)};
}

template <class S>
std::span<const S> ForwardPass<S>::probs(std::size_t t) const {
  if (t >= n_) throw ContractViolation("probs: position out of range");
  return {probs_.data() + t * V_, static_cast<std::size_t>(V_)};
}

template <class S>
std::span<const S> ForwardPass<S>::input_embedding(std::size_t t) const {
  if (t >= n_) throw ContractViolation("input_embedding: position out of range");
  return {emb_.data() + t * d_, static_cast<std::size_t>(d_)};
}

template <class S>
void ForwardPass<S>::push_embedding(std::span<const S> e) {
  if (e.size() != static_cast<std::size_t>(d_))
    throw ContractViolation("push_embedding: expected width " + std::to_string(d_));
  append_zeros(inputs_, static_cast<std::size_t>(V_));
  push(e, InputKind::Embedding);
}

template <class S>
void ForwardPass<S>::push_distribution(std::span<const S> p) {
  const auto e = soft_embed(p, *params_);
  inputs_.insert(inputs_.end(), p.begin(), p.end());
  push(e, InputKind::Distribution);
}

template <class S>
void ForwardPass<S>::push_token(int token) {
  if (token < 0 || token >= V_) throw ContractViolation("push_token: token out of range");
  std::vector<S> p(static_cast<std::size_t>(V_), S(0));
  p[static_cast<std::size_t>(token)] = S(1);
  push_distribution(p);
}

template <class S>
void ForwardPass<S>::push_feedback() {
  if (n_ == 0) throw ContractViolation("push_feedback: no previous prediction");
  const std::vector<S> p(probs_.begin() + static_cast<std::ptrdiff_t>((n_ - 1) * V_),
                         probs_.begin() + static_cast<std::ptrdiff_t>(n_ * V_));
  const auto e = soft_embed<S>(p, *params_);
  inputs_.insert(inputs_.end(), p.begin(), p.end());
  push(e, InputKind::Feedback);
}

template <class S>
void ForwardPass<S>::push(std::span<const S> e, InputKind kind) {
  const auto& P = *params_;
  const auto& cfg = P.config();
  if (n_ >= static_cast<std::size_t>(cfg.max_len))
    throw ContractViolation("forward: sequence longer than max_len=" + std::to_string(cfg.max_len));
  if (P.version() != version_)
    throw ContractViolation("forward: parameters changed since this pass started");

  const std::size_t t = n_;
  const auto d = static_cast<std::size_t>(d_);
  const auto ff = static_cast<std::size_t>(ff_);
  const std::size_t hd = d / static_cast<std::size_t>(H_);
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));

  kinds_.push_back(kind);
  emb_.insert(emb_.end(), e.begin(), e.end());

  std::vector<S> h(d), tmp(d);
  const S* pos = P.data(P.positional()) + t * d;
  for (std::size_t i = 0; i < d; ++i) h[i] = e[i] + pos[i];

  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& li = P.layer(l);
    LayerCache& c = layers_[static_cast<std::size_t>(l)];
    for (auto* v : {&c.xhat1, &c.a, &c.q, &c.k, &c.v, &c.concat, &c.xhat2, &c.b})
      append_zeros(*v, d);
    append_zeros(c.rstd1, 1);
    append_zeros(c.rstd2, 1);
    append_zeros(c.u, ff);
    append_zeros(c.g, ff);
    append_zeros(c.att, static_cast<std::size_t>(H_) * (t + 1));

    S* xhat1 = c.xhat1.data() + t * d;
    S* a = c.a.data() + t * d;
    layer_norm(h.data(), P.data(li.ln1_g), P.data(li.ln1_b), xhat1, &c.rstd1[t], a, d_);

    S* q = c.q.data() + t * d;
    kernels::gemv(P.data(li.wq), a, P.data(li.bq), q, d, d);
    kernels::gemv(P.data(li.wk), a, P.data(li.bk), c.k.data() + t * d, d, d);
    kernels::gemv(P.data(li.wv), a, P.data(li.bv), c.v.data() + t * d, d, d);

    // Attention probabilities for position t live at offset H*t*(t+1)/2.
    S* att = c.att.data() + static_cast<std::size_t>(H_) * t * (t + 1) / 2;
    S* concat = c.concat.data() + t * d;
    for (int head = 0; head < H_; ++head) {
      const std::size_t off = static_cast<std::size_t>(head) * hd;
      S* row = att + static_cast<std::size_t>(head) * (t + 1);
      for (std::size_t j = 0; j <= t; ++j)
        row[j] = kernels::dot(q + off, c.k.data() + j * d + off, hd) * scale;
      softmax_inplace(std::span<S>(row, t + 1));
      for (std::size_t j = 0; j <= t; ++j)
        kernels::axpy(row[j], c.v.data() + j * d + off, concat + off, hd);
    }

    kernels::gemv(P.data(li.wo), concat, P.data(li.bo), tmp.data(), d, d);
    for (std::size_t i = 0; i < d; ++i) h[i] += tmp[i];

    S* xhat2 = c.xhat2.data() + t * d;
    S* b = c.b.data() + t * d;
    layer_norm(h.data(), P.data(li.ln2_g), P.data(li.ln2_b), xhat2, &c.rstd2[t], b, d_);

    S* u = c.u.data() + t * ff;
    S* g = c.g.data() + t * ff;
    kernels::gemv(P.data(li.w1), b, P.data(li.b1), u, ff, d);
    for (std::size_t j = 0; j < ff; ++j) g[j] = gelu(u[j]);
    kernels::gemv(P.data(li.w2), g, P.data(li.b2), tmp.data(), d, ff);
    for (std::size_t i = 0; i < d; ++i) h[i] += tmp[i];
  }

  append_zeros(xhatf_, d);
  append_zeros(rstdf_, 1);
  append_zeros(hf_, d);
  layer_norm(h.data(), P.data(P.final_ln_gain()), P.data(P.final_ln_bias()), xhatf_.data() + t * d,
             &rstdf_[t], hf_.data() + t * d, d_);

  append_zeros(logits_, static_cast<std::size_t>(V_));
  S* z = logits_.data() + t * V_;
  kernels::gemv(P.data(P.head_weight()), hf_.data() + t * d, P.data(P.head_bias()), z,
                static_cast<std::size_t>(V_), d);
  probs_.insert(probs_.end(), z, z + V_);
  softmax_inplace(std::span<S>(probs_.data() + t * V_, static_cast<std::size_t>(V_)));

  ++n_;
}

template <class S>
BackwardResult<S> ForwardPass<S>::backward(std::span<const S> d_logits,
                                           ModelParams<S>& grads) const {
  const auto& P = *params_;
  const auto& cfg = P.config();
  if (n_ == 0) throw ContractViolation("backward: empty forward cache");
  if (P.version() != version_)
    throw ContractViolation("backward: stale cache (parameters updated after forward)");
  if (d_logits.size() != n_ * static_cast<std::size_t>(V_))
    throw ContractViolation("backward: d_logits must have n*V entries");
  if (!grads.same_shapes(P)) throw ContractViolation("backward: gradient buffer shape mismatch");

  const auto d = static_cast<std::size_t>(d_);
  const auto V = static_cast<std::size_t>(V_);
  const auto ff = static_cast<std::size_t>(ff_);
  const std::size_t hd = d / static_cast<std::size_t>(H_);
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));
  const auto L = static_cast<std::size_t>(cfg.n_layers);

  BackwardResult<S> out;
  out.d_logits_total.assign(d_logits.begin(), d_logits.end());
  out.d_embeddings.assign(n_ * d, S(0));
  out.d_inputs.assign(n_ * V, S(0));

  // Gradients w.r.t. keys and values, filled by later positions' attention.
  std::vector<std::vector<S>> dK(L, std::vector<S>(n_ * d, S(0)));
  std::vector<std::vector<S>> dV(L, std::vector<S>(n_ * d, S(0)));

  std::vector<S> dh(d), dtmp(d), dmid(d), dconcat(d), dq(d), da(d), dg(ff), du(ff), scratch(d);
  std::vector<S> datt(n_);

  for (std::size_t t = n_; t-- > 0;) {
    // Output head and final LayerNorm.
    const S* dz = out.d_logits_total.data() + t * V;
    kernels::ger_acc(dz, hf_.data() + t * d, grads.data(P.head_weight()), V, d);
    kernels::axpy(S(1), dz, grads.data(P.head_bias()), V);
    std::fill(dtmp.begin(), dtmp.end(), S(0));
    kernels::gemv_t_acc(P.data(P.head_weight()), dz, dtmp.data(), V, d);
    std::fill(dh.begin(), dh.end(), S(0));
    layer_norm_backward(dtmp.data(), P.data(P.final_ln_gain()), xhatf_.data() + t * d, rstdf_[t],
                        grads.data(P.final_ln_gain()), grads.data(P.final_ln_bias()), dh.data(),
                        d_, scratch.data());

    for (std::size_t l = L; l-- > 0;) {
      const auto& li = P.layer(static_cast<int>(l));
      const LayerCache& c = layers_[l];

      // Feed-forward branch: h_out = h_mid + W2 gelu(W1 LN2(h_mid) + b1) + b2.
      const S* g = c.g.data() + t * ff;
      const S* u = c.u.data() + t * ff;
      kernels::ger_acc(dh.data(), g, grads.data(li.w2), d, ff);
      kernels::axpy(S(1), dh.data(), grads.data(li.b2), d);
      std::fill(dg.begin(), dg.end(), S(0));
      kernels::gemv_t_acc(P.data(li.w2), dh.data(), dg.data(), d, ff);
      for (std::size_t j = 0; j < ff; ++j) du[j] = dg[j] * gelu_grad(u[j]);
      kernels::ger_acc(du.data(), c.b.data() + t * d, grads.data(li.w1), ff, d);
      kernels::axpy(S(1), du.data(), grads.data(li.b1), ff);
      std::fill(dtmp.begin(), dtmp.end(), S(0));
      kernels::gemv_t_acc(P.data(li.w1), du.data(), dtmp.data(), ff, d);
      dmid = dh;
      layer_norm_backward(dtmp.data(), P.data(li.ln2_g), c.xhat2.data() + t * d, c.rstd2[t],
                          grads.data(li.ln2_g), grads.data(li.ln2_b), dmid.data(), d_,
                          scratch.data());

      // Attention branch: h_mid = h_in + Wo concat + bo.
      kernels::ger_acc(dmid.data(), c.concat.data() + t * d, grads.data(li.wo), d, d);
      kernels::axpy(S(1), dmid.data(), grads.data(li.bo), d);
      std::fill(dconcat.begin(), dconcat.end(), S(0));
      kernels::gemv_t_acc(P.data(li.wo), dmid.data(), dconcat.data(), d, d);

      std::fill(dq.begin(), dq.end(), S(0));
      const S* q = c.q.data() + t * d;
      const S* att = c.att.data() + static_cast<std::size_t>(H_) * t * (t + 1) / 2;
      for (int head = 0; head < H_; ++head) {
        const std::size_t off = static_cast<std::size_t>(head) * hd;
        const S* row = att + static_cast<std::size_t>(head) * (t + 1);
        S weighted = 0;
        for (std::size_t j = 0; j <= t; ++j) {
          datt[j] = kernels::dot(dconcat.data() + off, c.v.data() + j * d + off, hd);
          weighted += row[j] * datt[j];
          kernels::axpy(row[j], dconcat.data() + off, dV[l].data() + j * d + off, hd);
        }
        for (std::size_t j = 0; j <= t; ++j) {
          const S ds = row[j] * (datt[j] - weighted) * scale;
          if (ds == S(0)) continue;
          kernels::axpy(ds, c.k.data() + j * d + off, dq.data() + off, hd);
          kernels::axpy(ds, q + off, dK[l].data() + j * d + off, hd);
        }
      }

      // Every position >= t has now contributed to dK/dV at t.
      const S* a = c.a.data() + t * d;
      const S* dk = dK[l].data() + t * d;
      const S* dv = dV[l].data() + t * d;
      kernels::ger_acc(dq.data(), a, grads.data(li.wq), d, d);
      kernels::ger_acc(dk, a, grads.data(li.wk), d, d);
      kernels::ger_acc(dv, a, grads.data(li.wv), d, d);
      kernels::axpy(S(1), dq.data(), grads.data(li.bq), d);
      kernels::axpy(S(1), dk, grads.data(li.bk), d);
      kernels::axpy(S(1), dv, grads.data(li.bv), d);
      std::fill(da.begin(), da.end(), S(0));
      kernels::gemv_t_acc(P.data(li.wq), dq.data(), da.data(), d, d);
      kernels::gemv_t_acc(P.data(li.wk), dk, da.data(), d, d);
      kernels::gemv_t_acc(P.data(li.wv), dv, da.data(), d, d);
      dh = dmid;
      layer_norm_backward(da.data(), P.data(li.ln1_g), c.xhat1.data() + t * d, c.rstd1[t],
                          grads.data(li.ln1_g), grads.data(li.ln1_b), dh.data(), d_,
                          scratch.data());
    }

    // Input: h0 = e + pos[t], e = E^T p.
    kernels::axpy(S(1), dh.data(), grads.data(P.positional()) + t * d, d);
    std::copy(dh.begin(), dh.end(), out.d_embeddings.begin() + static_cast<std::ptrdiff_t>(t * d));
    if (kinds_[t] == InputKind::Embedding) continue;

    const S* p = inputs_.data() + t * V;
    S* dp = out.d_inputs.data() + t * V;
    kernels::ger_acc(p, dh.data(), grads.data(P.token_embedding()), V, d);
    kernels::gemv(P.data(P.token_embedding()), dh.data(), nullptr, dp, V, d);

    if (kinds_[t] == InputKind::Feedback) {
      // p_t = softmax(z_{t-1}): dz = p * (dp - <p, dp>).
      const S* prev = probs_.data() + (t - 1) * V;
      const S inner = kernels::dot(prev, dp, V);
      S* dz_prev = out.d_logits_total.data() + (t - 1) * V;
      for (std::size_t v = 0; v < V; ++v) dz_prev[v] += prev[v] * (dp[v] - inner);
    }
  }
  return out;
}

template <class S>
ModelParams<S> ForwardPass<S>::backward(std::span<const S> d_logits) const {
  ModelParams<S> grads = params_->zeros_like();
  backward(d_logits, grads);
  return grads;
}

template <class S>
ForwardPass<S> forward(const ModelParams<S>& params, std::span<const std::vector<S>> embeddings) {
  ForwardPass<S> pass(params);
  for (const auto& e : embeddings) pass.push_embedding(e);
  return pass;
}

template <class S>
std::vector<S> step_autoregressive(const ModelParams<S>& params,
                                   std::span<const std::vector<S>> history) {
  if (history.empty()) throw ContractViolation("step_autoregressive: empty history");
  std::vector<std::vector<S>> embeddings;
  embeddings.reserve(history.size());
  for (const auto& p : history) embeddings.push_back(soft_embed<S>(p, params));
  const auto pass = forward<S>(params, embeddings);
  const auto last = pass.probs(pass.size() - 1);
  return {last.begin(), last.end()};
}

#define SOFTCAST_INSTANTIATE(S)                                                              \
  template class ModelParams<S>;                                                             \
  template class ForwardPass<S>;                                                             \
  template std::vector<S> soft_embed<S>(std::span<const S>, const ModelParams<S>&);          \
  template ForwardPass<S> forward<S>(const ModelParams<S>&, std::span<const std::vector<S>>); \
  template std::vector<S> step_autoregressive<S>(const ModelParams<S>&,                      \
                                                 std::span<const std::vector<S>>);           \
  template void softmax_inplace<S>(std::span<S>);                                            \
  template double cross_entropy<S>(std::span<const S>, int);

SOFTCAST_INSTANTIATE(float)
SOFTCAST_INSTANTIATE(double)

#undef SOFTCAST_INSTANTIATE

}  // namespace softcast
