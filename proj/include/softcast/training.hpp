#pragma once

// Two-stage curriculum: teacher-forced next-token cross-entropy, then
// trajectory fine-tuning where the model's own predicted distributions are
// fed back as soft tokens for L steps and the loss is differentiated through
// the whole rollout.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "softcast/model.hpp"
#include "softcast/quantizer.hpp"

namespace softcast {

struct TrainConfig {
  int batch_size = 64;
  double lr_stage1 = 1e-4;
  double lr_stage2 = 1e-5;
  double clip_norm = 1.0;
  int patience = 5;
  int max_epochs = 50;           // per stage
  int horizon = 48;              // L
  std::uint64_t seed = 0;
  bool trajectory_training = true;
  int batches_per_epoch = 0;     // 0: one full pass over the training windows
  int max_val_windows = 0;       // 0: all validation windows
  int threads = 1;
  double init_scale = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

/// Throws ConfigError for non-positive rates, batch size, clip norm, ...
void validate(const TrainConfig& cfg);

struct LossValue {
  double loss = 0.0;       // mean cross-entropy
  std::size_t terms = 0;   // number of (window, position) targets
};

/// Teacher-forced loss over each window's full sequence
/// [mu, sigma, h_1..h_T, y_1..y_{L-1}] fed as one-hot tokens. Targets are
/// h_1..h_T, y_1..y_L (the context tokens are never targets). When `grads`
/// is non-null the gradient of the mean loss is accumulated into it.
/// `probs_out`, when given, receives the predicted distribution for every
/// target in order.
template <class S>
LossValue stage1_loss(std::span<const TokenizedWindow> batch, const ModelParams<S>& params,
                      ModelParams<S>* grads = nullptr, int threads = 1,
                      std::vector<std::vector<double>>* probs_out = nullptr);

/// Trajectory loss: [mu, sigma, h_1..h_T] as one-hot tokens, then L steps
/// where each predicted distribution is fed back as the next input. Loss is
/// the mean over windows and steps of w_k * CE(step k, y_k) (w_k = 1 when
/// `step_weights` is empty). Throws ConfigError if T + 2 + L - 1 > max_len.
template <class S>
LossValue stage2_loss(std::span<const TokenizedWindow> batch, const ModelParams<S>& params, int L,
                      ModelParams<S>* grads = nullptr, int threads = 1,
                      std::span<const double> step_weights = {});

/// Global L2 norm over every tensor (accumulated in double).
template <class S>
double global_norm(const ModelParams<S>& grads);

/// Scales all buffers by clip_norm / g when the global norm g exceeds
/// clip_norm. Returns g (pre-clip).
template <class S>
double clip_gradients(ModelParams<S>& grads, double clip_norm);

template <class S>
class Adam {
 public:
  Adam(const ModelParams<S>& like, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(ModelParams<S>& params, const ModelParams<S>& grads);
  void set_lr(double lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct EpochRecord {
  int stage = 1;
  int epoch = 0;  // 1-based within the stage
  double train_loss = 0.0;
  double val_loss = 0.0;
  double grad_norm = 0.0;  // mean pre-clip norm over the epoch's batches
  bool improved = false;
};

struct StageSummary {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  StageSummary stage1;
  std::optional<StageSummary> stage2;
  bool aborted = false;
  std::string abort_reason;
  std::string checkpoint_path;

  std::string to_jsonl() const;       // one line per epoch
  std::string summary_json() const;
};

struct TrainResult {
  ModelParams<float> params;         // best parameters of the last stage run
  ModelParams<float> stage1_params;  // best stage-1 parameters
  TrainReport report;
};

/// Runs stage 1 with early stopping on validation stage-1 loss and, when
/// cfg.trajectory_training is set, stage 2 from the best stage-1 parameters
/// with early stopping on validation stage-2 loss. A non-finite loss or
/// parameter aborts training; the result then holds the last good
/// parameters and report.aborted is set.
TrainResult run_curriculum(const std::vector<TokenizedWindow>& train,
                           const std::vector<TokenizedWindow>& val, const ModelConfig& model_cfg,
                           const TrainConfig& cfg,
                           const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace softcast
