#include "softcast/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "softcast/error.hpp"
#include "softcast/random.hpp"

namespace softcast {

void validate(const TrainConfig& cfg) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be > 0");
  };
  positive(cfg.lr_stage1, "lr_stage1");
  positive(cfg.lr_stage2, "lr_stage2");
  positive(cfg.clip_norm, "clip_norm");
  positive(cfg.init_scale, "init_scale");
  positive(cfg.adam_eps, "adam_eps");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.patience < 0) throw ConfigError("patience must be >= 0");
  if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (cfg.horizon < 1) throw ConfigError("horizon must be >= 1");
  if (cfg.batches_per_epoch < 0) throw ConfigError("batches_per_epoch must be >= 0");
  if (cfg.max_val_windows < 0) throw ConfigError("max_val_windows must be >= 0");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0) || !(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
}

namespace {

// Runs fn(i, grads_i) for every sample, each into its own buffer, then sums the
// buffers in sample order so the result does not depend on the thread count.
template <class S, class Fn>
void for_each_sample(std::size_t n, int threads, const ModelParams<S>& params, ModelParams<S>* grads,
                     Fn&& fn) {
  std::vector<ModelParams<S>> per(grads ? n : 0);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (grads) per[i] = params.zeros_like();
      fn(i, grads ? &per[i] : nullptr);
    }
  };
  const auto nt = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (nt <= 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < nt; ++k) pool.emplace_back(work, k * n / nt, (k + 1) * n / nt);
    for (auto& t : pool) t.join();
  }
  if (!grads) return;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = grads->tensors();
    const auto& src = per[i].tensors();
    for (std::size_t t = 0; t < dst.size(); ++t)
      for (std::size_t j = 0; j < dst[t].data.size(); ++j) dst[t].data[j] += src[t].data[j];
  }
}

template <class S>
void add_ce_grad(std::span<const S> probs, int target, double scale, S* d_logits) {
  for (std::size_t v = 0; v < probs.size(); ++v)
    d_logits[v] = static_cast<S>(scale * (static_cast<double>(probs[v]) - (static_cast<int>(v) == target ? 1.0 : 0.0)));
}

}  // namespace

template <class S>
LossValue stage1_loss(std::span<const TokenizedWindow> batch, const ModelParams<S>& params,
                      ModelParams<S>* grads, int threads,
                      std::vector<std::vector<double>>* probs_out) {
  const auto& cfg = params.config();
  std::size_t total = 0;
  for (const auto& w : batch) {
    const std::size_t len = w.history.size() + 2 + (w.target.empty() ? 0 : w.target.size() - 1);
    if (len > static_cast<std::size_t>(cfg.max_len))
      throw ConfigError("window of " + std::to_string(len) + " tokens exceeds max_len " +
                        std::to_string(cfg.max_len));
    total += w.history.size() + w.target.size();
  }
  if (total == 0) throw ContractViolation("stage1_loss: empty batch");
  const double scale = 1.0 / static_cast<double>(total);

  std::vector<double> ce(batch.size(), 0.0);
  std::vector<std::vector<std::vector<double>>> probs(probs_out ? batch.size() : 0);
  for_each_sample<S>(batch.size(), threads, params, grads, [&](std::size_t i, ModelParams<S>* g) {
    const auto& w = batch[i];
    std::vector<int> seq = w.input_sequence();
    if (!w.target.empty()) seq.insert(seq.end(), w.target.begin(), w.target.end() - 1);
    ForwardPass<S> pass(params);
    for (int tok : seq) pass.push_token(tok);
    std::vector<int> targets = w.history;
    targets.insert(targets.end(), w.target.begin(), w.target.end());
    std::vector<S> d_logits(g ? pass.size() * static_cast<std::size_t>(cfg.V) : 0, S(0));
    double sum = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const std::size_t pos = k + 1;
      sum += cross_entropy<S>(pass.logits(pos), targets[k]);
      if (g) add_ce_grad<S>(pass.probs(pos), targets[k], scale, d_logits.data() + pos * cfg.V);
      if (probs_out) {
        const auto p = pass.probs(pos);
        probs[i].emplace_back(p.begin(), p.end());
      }
    }
    ce[i] = sum;
    if (g) pass.backward(d_logits, *g);
  });
  if (probs_out)
    for (auto& per : probs)
      for (auto& p : per) probs_out->push_back(std::move(p));
  double sum = 0.0;
  for (double c : ce) sum += c;
  return {sum * scale, total};
}

template <class S>
LossValue stage2_loss(std::span<const TokenizedWindow> batch, const ModelParams<S>& params, int L,
                      ModelParams<S>* grads, int threads, std::span<const double> step_weights) {
  const auto& cfg = params.config();
  if (L < 1) throw ConfigError("stage 2 horizon must be >= 1");
  if (!step_weights.empty() && step_weights.size() != static_cast<std::size_t>(L))
    throw ContractViolation("stage2_loss: step_weights must have L entries");
  if (batch.empty()) throw ContractViolation("stage2_loss: empty batch");
  for (const auto& w : batch) {
    if (w.target.size() < static_cast<std::size_t>(L))
      throw ContractViolation("stage2_loss: window target shorter than L");
    if (w.history.size() + 2 + static_cast<std::size_t>(L) - 1 > static_cast<std::size_t>(cfg.max_len))
      throw ConfigError("T + 2 + L - 1 = " + std::to_string(w.history.size() + 1 + L) +
                        " exceeds max_len " + std::to_string(cfg.max_len));
  }
  const std::size_t total = batch.size() * static_cast<std::size_t>(L);
  const double scale = 1.0 / static_cast<double>(total);

  std::vector<double> ce(batch.size(), 0.0);
  for_each_sample<S>(batch.size(), threads, params, grads, [&](std::size_t i, ModelParams<S>* g) {
    const auto& w = batch[i];
    ForwardPass<S> pass(params);
    for (int tok : w.input_sequence()) pass.push_token(tok);
    const std::size_t first = pass.size() - 1;
    for (int k = 0; k + 1 < L; ++k) pass.push_feedback();
    std::vector<S> d_logits(g ? pass.size() * static_cast<std::size_t>(cfg.V) : 0, S(0));
    double sum = 0.0;
    for (int k = 0; k < L; ++k) {
      const double wk = step_weights.empty() ? 1.0 : step_weights[static_cast<std::size_t>(k)];
      const std::size_t pos = first + static_cast<std::size_t>(k);
      const int target = w.target[static_cast<std::size_t>(k)];
      sum += wk * cross_entropy<S>(pass.logits(pos), target);
      if (g && wk != 0.0) add_ce_grad<S>(pass.probs(pos), target, wk * scale, d_logits.data() + pos * cfg.V);
    }
    ce[i] = sum;
    if (g) pass.backward(d_logits, *g);
  });
  double sum = 0.0;
  for (double c : ce) sum += c;
  return {sum * scale, total};
}

template <class S>
double global_norm(const ModelParams<S>& grads) {
  double sq = 0.0;
  for (const auto& t : grads.tensors())
    for (S x : t.data) sq += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sq);
}

template <class S>
double clip_gradients(ModelParams<S>& grads, double clip_norm) {
  const double g = global_norm(grads);
  if (g > clip_norm) {
    const double s = clip_norm / g;
    for (auto& t : grads.tensors())
      for (auto& x : t.data) x = static_cast<S>(static_cast<double>(x) * s);
  }
  return g;
}

template <class S>
Adam<S>::Adam(const ModelParams<S>& like, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  for (const auto& t : like.tensors()) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

template <class S>
void Adam<S>::step(ModelParams<S>& params, const ModelParams<S>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  auto& pt = params.tensors();
  const auto& gt = grads.tensors();
  for (std::size_t k = 0; k < pt.size(); ++k) {
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t j = 0; j < pt[k].data.size(); ++j) {
      const double g = static_cast<double>(gt[k].data[j]);
      m[j] = b1_ * m[j] + (1.0 - b1_) * g;
      v[j] = b2_ * v[j] + (1.0 - b2_) * g * g;
      const double upd = lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
      pt[k].data[j] = static_cast<S>(static_cast<double>(pt[k].data[j]) - upd);
    }
  }
  params.bump_version();
}

// ---------------------------------------------------------------------------

std::string TrainReport::to_jsonl() const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::ordered_json j;
    j["stage"] = e.stage;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["val_loss"] = e.val_loss;
    j["grad_norm"] = e.grad_norm;
    j["improved"] = e.improved;
    out += j.dump() + "\n";
  }
  return out;
}

std::string TrainReport::summary_json() const {
  nlohmann::ordered_json j;
  auto stage = [](const StageSummary& s) {
    nlohmann::ordered_json o;
    o["epochs_run"] = s.epochs_run;
    o["best_epoch"] = s.best_epoch;
    o["best_val_loss"] = s.best_val_loss;
    return o;
  };
  j["stage1"] = stage(stage1);
  j["stage2"] = stage2 ? stage(*stage2) : nlohmann::ordered_json(nullptr);
  j["aborted"] = aborted;
  if (aborted) j["abort_reason"] = abort_reason;
  j["checkpoint"] = checkpoint_path;
  return j.dump(2) + "\n";
}

namespace {

struct StageOutcome {
  ModelParams<float> best;
  StageSummary summary;
  bool aborted = false;
  std::string reason;
};

StageOutcome run_stage(int stage, const ModelParams<float>& start,
                       const std::vector<TokenizedWindow>& train,
                       const std::vector<TokenizedWindow>& val, const TrainConfig& cfg,
                       TrainReport& report, const std::function<void(const EpochRecord&)>& on_epoch) {
  const double lr = stage == 1 ? cfg.lr_stage1 : cfg.lr_stage2;
  auto loss_of = [&](std::span<const TokenizedWindow> b, const ModelParams<float>& p,
                     ModelParams<float>* g) {
    return stage == 1 ? stage1_loss<float>(b, p, g, cfg.threads).loss
                      : stage2_loss<float>(b, p, cfg.horizon, g, cfg.threads).loss;
  };

  StageOutcome out{start, {}, false, {}};
  ModelParams<float> params = start;
  Adam<float> opt(params, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  double best = std::numeric_limits<double>::infinity();
  int bad = 0;
  const std::size_t n = train.size();
  const auto B = static_cast<std::size_t>(cfg.batch_size);
  std::size_t n_batches = (n + B - 1) / B;
  if (cfg.batches_per_epoch > 0) n_batches = std::min(n_batches, static_cast<std::size_t>(cfg.batches_per_epoch));

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(stage) * 1000003u + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);

    double train_sum = 0.0, norm_sum = 0.0;
    std::vector<TokenizedWindow> batch;
    for (std::size_t b = 0; b < n_batches; ++b) {
      batch.clear();
      for (std::size_t i = b * B; i < std::min(n, (b + 1) * B); ++i) batch.push_back(train[perm[i]]);
      ModelParams<float> grads = params.zeros_like();
      const double loss = loss_of(batch, params, &grads);
      if (!std::isfinite(loss)) {
        out.aborted = true;
        out.reason = "non-finite training loss in stage " + std::to_string(stage) + ", epoch " +
                     std::to_string(epoch) + ", batch " + std::to_string(b + 1);
        return out;
      }
      norm_sum += clip_gradients(grads, cfg.clip_norm);
      opt.step(params, grads);
      if (!params.all_finite()) {
        out.aborted = true;
        out.reason = "non-finite parameters after update in stage " + std::to_string(stage) +
                     ", epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1);
        return out;
      }
      train_sum += loss;
    }

    EpochRecord rec;
    rec.stage = stage;
    rec.epoch = epoch;
    rec.train_loss = train_sum / static_cast<double>(n_batches);
    rec.grad_norm = norm_sum / static_cast<double>(n_batches);
    rec.val_loss = loss_of(val, params, nullptr);
    if (!std::isfinite(rec.val_loss)) {
      out.aborted = true;
      out.reason = "non-finite validation loss in stage " + std::to_string(stage) + ", epoch " +
                   std::to_string(epoch);
      return out;
    }
    rec.improved = rec.val_loss < best;
    out.summary.epochs_run = epoch;
    if (rec.improved) {
      best = rec.val_loss;
      out.best = params;
      out.summary.best_epoch = epoch;
      out.summary.best_val_loss = best;
      bad = 0;
    } else {
      ++bad;
    }
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (bad > 0 && bad >= cfg.patience) break;
  }
  return out;
}

}  // namespace

TrainResult run_curriculum(const std::vector<TokenizedWindow>& train,
                           const std::vector<TokenizedWindow>& val, const ModelConfig& model_cfg,
                           const TrainConfig& cfg,
                           const std::function<void(const EpochRecord&)>& on_epoch) {
  validate(cfg);
  validate(model_cfg);
  if (train.empty()) throw ConfigError("no training windows");
  if (val.empty()) throw ConfigError("no validation windows");
  for (const auto* set : {&train, &val})
    for (const auto& w : *set) {
      if (w.target.size() != static_cast<std::size_t>(cfg.horizon))
        throw ConfigError("window target length " + std::to_string(w.target.size()) +
                          " differs from the training horizon " + std::to_string(cfg.horizon));
      if (w.history.size() + 2 + w.target.size() - 1 > static_cast<std::size_t>(model_cfg.max_len))
        throw ConfigError("T + 2 + L - 1 = " + std::to_string(w.history.size() + 1 + w.target.size()) +
                          " exceeds max_len " + std::to_string(model_cfg.max_len));
    }

  std::vector<TokenizedWindow> val_set = val;
  if (cfg.max_val_windows > 0 && val.size() > static_cast<std::size_t>(cfg.max_val_windows)) {
    // Evenly spaced deterministic subset.
    val_set.clear();
    const auto m = static_cast<std::size_t>(cfg.max_val_windows);
    for (std::size_t i = 0; i < m; ++i) val_set.push_back(val[i * val.size() / m]);
  }

  TrainResult res;
  const auto init = ModelParams<float>::initialized(model_cfg, mix_seed(cfg.seed, 0x5EED), cfg.init_scale);
  StageOutcome s1 = run_stage(1, init, train, val_set, cfg, res.report, on_epoch);
  res.report.stage1 = s1.summary;
  res.stage1_params = s1.best;
  res.params = s1.best;
  if (s1.aborted) {
    res.report.aborted = true;
    res.report.abort_reason = s1.reason;
    return res;
  }
  if (!cfg.trajectory_training) return res;

  StageOutcome s2 = run_stage(2, s1.best, train, val_set, cfg, res.report, on_epoch);
  res.report.stage2 = s2.summary;
  res.params = s2.best;
  if (s2.aborted) {
    res.report.aborted = true;
    res.report.abort_reason = s2.reason;
  }
  return res;
}

#define SOFTCAST_INSTANTIATE(S)                                                                    \
  template LossValue stage1_loss<S>(std::span<const TokenizedWindow>, const ModelParams<S>&,        \
                                    ModelParams<S>*, int, std::vector<std::vector<double>>*);       \
  template LossValue stage2_loss<S>(std::span<const TokenizedWindow>, const ModelParams<S>&, int,   \
                                    ModelParams<S>*, int, std::span<const double>);                 \
  template double global_norm<S>(const ModelParams<S>&);                                           \
  template double clip_gradients<S>(ModelParams<S>&, double);                                      \
  template class Adam<S>;

SOFTCAST_INSTANTIATE(float)
SOFTCAST_INSTANTIATE(double)

#undef SOFTCAST_INSTANTIATE

}  // namespace softcast
