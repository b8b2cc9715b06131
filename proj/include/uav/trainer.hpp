#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "uav/errors.hpp"
#include "uav/losses.hpp"
#include "uav/masking.hpp"
#include "uav/model.hpp"
#include "uav/patchio.hpp"
#include "uav/rng.hpp"

namespace uav {

enum class OptimizerKind { sgd, adam };

OptimizerKind optimizer_from_string(const std::string& s);
const char* optimizer_name(OptimizerKind k);

struct TrainConfig {
  int steps = 500;
  int batch_size = 8;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 1234;
  int checkpoint_every = 100;  // 0 disables periodic checkpoints (final still written)
  int log_every = 10;
  double grad_clip = 1.0;      // global-norm cap; <= 0 disables

  void validate() const {
    if (steps < 1) throw ConfigError("train.steps: must be at least 1");
    if (batch_size < 2) throw ConfigError("train.batch_size: must be at least 2 (contrastive loss)");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate: must be positive");
    if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every: must be non-negative");
    if (log_every < 1) throw ConfigError("train.log_every: must be at least 1");
  }
};

// One training sample, fully tokenized (audio already channel-inflated).
struct TrainSample {
  std::string id;
  std::string speaker;
  TokenSequence audio;
  TokenSequence visual;
};

// ---------------------------------------------------------------------------
// deterministic randomness layout
//
// All draws key off (seed, purpose, step), never off call order, so resumed
// runs and different batch sizes consume identical per-step sequences:
//   mask ratios    substream "mask.ratios", counter 2*step
//   mask indices   substream "mask.indices"/step, forked per slot+modality
//   data order     substream "data.order"/epoch
//   init           substream "init"
// ---------------------------------------------------------------------------

inline std::pair<double, double> ratios_for_step(const RngStream& root, const MaskConfig& cfg,
                                                 std::uint64_t step) {
  RngStream r = root.substream("mask.ratios").at(2 * step);
  return sample_ratios(r, cfg);
}

inline MaskPlan plan_for_sample(const RngStream& root, const MaskConfig& cfg, std::uint64_t step,
                                int slot, int audio_tokens, int visual_tokens) {
  auto [ra, rv] = ratios_for_step(root, cfg, step);
  RngStream per_step = root.substream("mask.indices", step);
  RngStream sa = per_step.substream("audio", static_cast<std::uint64_t>(slot));
  RngStream sv = per_step.substream("visual", static_cast<std::uint64_t>(slot));
  MaskPlan plan;
  plan.ratio_audio = ra;
  plan.ratio_visual = rv;
  plan.audio = sample_mask_indices(audio_tokens, ra, sa);
  plan.visual = sample_mask_indices(visual_tokens, rv, sv);
  return plan;
}

// Sample indices for one step: epoch-wise permutations without replacement,
// computed from (seed, epoch) alone.
std::vector<int> epoch_permutation(const RngStream& root, std::uint64_t epoch, int n_samples);
std::vector<int> batch_indices(const RngStream& root, std::uint64_t step, int batch_size, int n_samples);

// ---------------------------------------------------------------------------
// batch forward
// ---------------------------------------------------------------------------

template <class S>
struct BatchGraph {
  Tensor<S> total;
  Tensor<S> contrastive;
  Tensor<S> reconstruction;
  LossReport report;
};

// Masked dual-objective forward for one batch: per sample, encode the
// unmasked tokens of both modalities with the shared backbone, pool for the
// contrastive branch, joint-encode/decode for the reconstruction branch; then
// combine per Eq-style L = L_r + lambda * L_c.
template <class S>
BatchGraph<S> forward_batch(const std::vector<const TrainSample*>& batch,
                            const std::vector<MaskPlan>& plans, const ModelState<S>& st,
                            const LossConfig& loss_cfg) {
  const int B = static_cast<int>(batch.size());
  if (B < 2) throw PreconditionError("forward_batch: batch size must be at least 2");
  if (plans.size() != batch.size())
    throw PreconditionError("forward_batch: one mask plan per sample required");

  std::vector<Tensor<S>> pooled_audio, pooled_visual;
  Tensor<S> recon_sum;
  for (int i = 0; i < B; ++i) {
    const TrainSample& s = *batch[static_cast<std::size_t>(i)];
    const MaskPlan& plan = plans[static_cast<std::size_t>(i)];
    TokenSequence ua = select_tokens(s.audio, plan.audio.unmasked);
    TokenSequence uv = select_tokens(s.visual, plan.visual.unmasked);
    Tensor<S> feat_a = encode(ua, st);
    Tensor<S> feat_v = encode(uv, st);
    pooled_audio.push_back(pool_embedding(feat_a));
    pooled_visual.push_back(pool_embedding(feat_v));

    Tensor<S> joint = joint_encode(feat_a, ua.source_index, feat_v, uv.source_index, st);
    Reconstruction<S> rec = joint_decode(joint, plan, st);
    Tensor<S> target_a = Tensor<S>::from_cast({s.audio.count(), s.audio.token_dim}, s.audio.tokens);
    Tensor<S> target_v = Tensor<S>::from_cast({s.visual.count(), s.visual.token_dim}, s.visual.tokens);
    Tensor<S> lr_i = reconstruction_loss(rec.audio, target_a, rec.visual, target_v, plan, loss_cfg);
    recon_sum = recon_sum.data ? add(recon_sum, lr_i) : lr_i;
  }

  BatchGraph<S> g;
  g.reconstruction = scale(recon_sum, 1.0 / B);
  g.contrastive = contrastive_loss(stack_vecs(pooled_audio), stack_vecs(pooled_visual), loss_cfg);
  g.total = total_loss(g.reconstruction, g.contrastive, loss_cfg.lambda);
  g.report.batch_size = B;
  g.report.contrastive = static_cast<double>(g.contrastive.at(0));
  g.report.reconstruction = static_cast<double>(g.reconstruction.at(0));
  g.report.total = static_cast<double>(g.total.at(0));
  return g;
}

// ---------------------------------------------------------------------------
// optimizers
// ---------------------------------------------------------------------------

template <class S>
struct OptState {
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::int64_t t = 0;                // completed update count
  std::vector<std::vector<S>> m, v;  // parallel to the model registry (adam only)
};

template <class S>
OptState<S> init_opt_state(const ModelState<S>& st, OptimizerKind kind) {
  OptState<S> o;
  o.kind = kind;
  if (kind == OptimizerKind::adam) {
    for (const ParamRef<S>& p : st.registry) {
      o.m.emplace_back(p.tensor.numel(), S(0));
      o.v.emplace_back(p.tensor.numel(), S(0));
    }
  }
  return o;
}

template <class S>
void zero_param_grads(ModelState<S>& st) {
  for (ParamRef<S>& p : st.registry) {
    p.tensor.ensure_grad();
    p.tensor.zero_grad();
  }
}

// Global-norm gradient clip over all registered parameters.
template <class S>
double clip_gradients(ModelState<S>& st, double max_norm) {
  double sq = 0.0;
  for (const ParamRef<S>& p : st.registry)
    for (S g : *p.tensor.grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S k = static_cast<S>(max_norm / norm);
    for (ParamRef<S>& p : st.registry)
      for (S& g : *p.tensor.grad) g *= k;
  }
  return norm;
}

template <class S>
void apply_update(ModelState<S>& st, OptState<S>& opt, double lr) {
  if (opt.kind == OptimizerKind::sgd) {
    ++opt.t;
    for (ParamRef<S>& p : st.registry) {
      std::vector<S>& w = *p.tensor.data;
      const std::vector<S>& g = *p.tensor.grad;
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= static_cast<S>(lr) * g[i];
    }
    return;
  }
  ++opt.t;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
  for (std::size_t pi = 0; pi < st.registry.size(); ++pi) {
    std::vector<S>& w = *st.registry[pi].tensor.data;
    const std::vector<S>& g = *st.registry[pi].tensor.grad;
    std::vector<S>& m = opt.m[pi];
    std::vector<S>& v = opt.v[pi];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = opt.beta1 * static_cast<double>(m[i]) + (1.0 - opt.beta1) * gi;
      const double vi = opt.beta2 * static_cast<double>(v[i]) + (1.0 - opt.beta2) * gi * gi;
      m[i] = static_cast<S>(mi);
      v[i] = static_cast<S>(vi);
      w[i] -= static_cast<S>(lr * (mi / bc1) / (std::sqrt(vi / bc2) + opt.eps));
    }
  }
}

// ---------------------------------------------------------------------------
// one optimizer step
// ---------------------------------------------------------------------------

struct StepRecord {
  LossReport losses;
  double ratio_audio = 0.0;
  double ratio_visual = 0.0;
  double grad_norm = 0.0;
};

template <class S>
StepRecord train_step(const std::vector<const TrainSample*>& batch, ModelState<S>& st,
                      OptState<S>& opt, const TrainConfig& tc, const MaskConfig& mc,
                      const LossConfig& lc, std::uint64_t step, const RngStream& root) {
  if (batch.empty()) throw PreconditionError("train_step: empty batch");
  std::vector<MaskPlan> plans;
  plans.reserve(batch.size());
  for (std::size_t slot = 0; slot < batch.size(); ++slot)
    plans.push_back(plan_for_sample(root, mc, step, static_cast<int>(slot),
                                    batch[slot]->audio.count(), batch[slot]->visual.count()));
  zero_param_grads(st);
  BatchGraph<S> g = forward_batch(batch, plans, st, lc);
  if (!std::isfinite(g.report.total))
    throw NumericError("train_step: non-finite loss at step " + std::to_string(step));
  g.total.backward();
  StepRecord rec;
  rec.losses = g.report;
  rec.ratio_audio = plans[0].ratio_audio;
  rec.ratio_visual = plans[0].ratio_visual;
  rec.grad_norm = clip_gradients(st, tc.grad_clip);
  if (!std::isfinite(rec.grad_norm))
    throw NumericError("train_step: non-finite gradients at step " + std::to_string(step));
  apply_update(st, opt, tc.learning_rate);
  return rec;
}

// ---------------------------------------------------------------------------
// full training run (f32)
// ---------------------------------------------------------------------------

struct TrainResult {
  std::string final_checkpoint;
  std::string inference_checkpoint;
  std::string metrics_log;
  std::int64_t steps_run = 0;
  StepRecord last;
};

std::vector<TrainSample> load_train_samples(const std::string& manifest_path, const ModelConfig& cfg);

// Runs the loop, writing periodic/full/inference checkpoints and a JSON-lines
// metrics log into out_dir. `effective_config` is echoed into the out dir and
// every checkpoint. A non-empty resume path continues a previous run.
TrainResult train(const ModelConfig& model_cfg, const MaskConfig& mask_cfg, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg, const nlohmann::json& effective_config,
                  const std::string& manifest_path, const std::string& out_dir,
                  const std::string& resume_path = "");

}  // namespace uav
