#pragma once

#include <cmath>
#include <string>

#include "uav/errors.hpp"
#include "uav/masking.hpp"
#include "uav/ops.hpp"
#include "uav/tensor.hpp"

namespace uav {

enum class ContrastiveDirection { a2v, symmetric };
enum class ReconTarget { masked_only, all_tokens };

ContrastiveDirection direction_from_string(const std::string& s);
ReconTarget recon_target_from_string(const std::string& s);
const char* direction_name(ContrastiveDirection d);
const char* recon_target_name(ReconTarget t);

struct LossConfig {
  double tau = 0.05;
  double lambda = 0.01;
  ContrastiveDirection direction = ContrastiveDirection::a2v;
  ReconTarget recon_target = ReconTarget::masked_only;

  void validate() const {
    if (!(tau > 0.0)) throw ConfigError("loss.tau: must be positive");
    if (lambda < 0.0) throw ConfigError("loss.lambda: must be non-negative");
  }
};

struct LossReport {
  double contrastive = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
  int batch_size = 0;
};

// InfoNCE over pooled embeddings: logits are cosine similarities over the
// batch scaled by 1/tau, positives on the diagonal. a2v scores each audio row
// against all visual rows; symmetric averages both directions.
template <class S>
Tensor<S> contrastive_loss(const Tensor<S>& pooled_audio, const Tensor<S>& pooled_visual,
                           const LossConfig& cfg) {
  cfg.validate();
  expect_matrix(pooled_audio, "contrastive_loss");
  expect_same_shape(pooled_audio, pooled_visual, "contrastive_loss");
  const int batch = pooled_audio.rows();
  if (batch < 2)
    throw PreconditionError("contrastive_loss: batch size must be at least 2, got " +
                            std::to_string(batch));
  check_finite(pooled_audio, "contrastive_loss(audio)");
  check_finite(pooled_visual, "contrastive_loss(visual)");
  Tensor<S> logits = scale(matmul_nt(l2_normalize_rows(pooled_audio), l2_normalize_rows(pooled_visual)),
                           1.0 / cfg.tau);
  if (cfg.direction == ContrastiveDirection::a2v) return cross_entropy_diagonal(logits);
  Tensor<S> both = add(cross_entropy_diagonal(logits), cross_entropy_diagonal(transpose(logits)));
  return scale(both, 0.5);
}

// Mean squared error of reconstructed vs. original tokens for one modality,
// restricted to the penalized index set.
template <class S>
Tensor<S> masked_mse(const Tensor<S>& recon, const Tensor<S>& target, const std::vector<int>& rows) {
  expect_same_shape(recon, target, "masked_mse");
  Tensor<S> d = sub(gather_rows(recon, rows), gather_rows(target, rows));
  return mean_all(mul(d, d));
}

// Reconstruction objective: per-modality MSE over masked tokens (default) or
// all tokens, summed across the two modality terms.
template <class S>
Tensor<S> reconstruction_loss(const Tensor<S>& recon_audio, const Tensor<S>& target_audio,
                              const Tensor<S>& recon_visual, const Tensor<S>& target_visual,
                              const MaskPlan& plan, const LossConfig& cfg) {
  if (cfg.recon_target == ReconTarget::masked_only &&
      (plan.audio.masked.empty() || plan.visual.masked.empty()))
    throw PreconditionError("reconstruction_loss: empty masked set with recon_target=masked_only");
  std::vector<int> all_a(static_cast<std::size_t>(recon_audio.rows()));
  std::vector<int> all_v(static_cast<std::size_t>(recon_visual.rows()));
  for (std::size_t i = 0; i < all_a.size(); ++i) all_a[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < all_v.size(); ++i) all_v[i] = static_cast<int>(i);
  const bool masked_only = cfg.recon_target == ReconTarget::masked_only;
  Tensor<S> la = masked_mse(recon_audio, target_audio, masked_only ? plan.audio.masked : all_a);
  Tensor<S> lv = masked_mse(recon_visual, target_visual, masked_only ? plan.visual.masked : all_v);
  return add(la, lv);
}

// Combined objective: reconstruction plus lambda-scaled contrastive term.
template <class S>
Tensor<S> total_loss(const Tensor<S>& reconstruction, const Tensor<S>& contrastive, double lambda) {
  check_finite(reconstruction, "total_loss(reconstruction)");
  check_finite(contrastive, "total_loss(contrastive)");
  return add(reconstruction, scale(contrastive, lambda));
}

}  // namespace uav
