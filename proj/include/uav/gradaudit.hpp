#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "uav/gradcheck.hpp"
#include "uav/trainer.hpp"

namespace uav {

struct GradAuditConfig {
  ModelConfig model;
  MaskConfig mask;
  LossConfig loss;
  int batch_size = 2;
  std::uint64_t seed = 42;
  double eps = 1e-3;
  double rtol = 1e-3;
  // Absolute slack at the finite-difference oracle's own noise floor,
  // ~ulp(loss)/eps; below it the oracle cannot measure a disagreement.
  double atol = 5e-4;
  int coords_per_param = 20;
};

struct GradAuditResult {
  std::int64_t checked = 0;
  std::int64_t failed = 0;
  double worst_rel = 0.0;
  double pass_fraction = 1.0;
  double loss_value = 0.0;
};

// Random in-memory token sequences shaped like real data.
inline std::vector<TrainSample> make_random_samples(const ModelConfig& cfg, int count,
                                                    RngStream rng) {
  std::vector<TrainSample> samples;
  for (int i = 0; i < count; ++i) {
    TrainSample s;
    s.id = "rand" + std::to_string(i);
    s.speaker = s.id;
    auto fill = [&](TokenSequence& t, Modality m, int rows, int cols) {
      t.modality = m;
      t.patch_size = cfg.patch_size;
      t.grid_rows = rows;
      t.grid_cols = cols;
      t.token_dim = cfg.token_dim();
      const int n = rows * cols;
      t.tokens.resize(static_cast<std::size_t>(n) * t.token_dim);
      t.source_index.resize(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k) t.source_index[static_cast<std::size_t>(k)] = k;
      for (float& v : t.tokens) v = static_cast<float>(rng.normal());
    };
    fill(s.audio, Modality::audio, cfg.audio_grid_rows(), cfg.audio_grid_cols());
    fill(s.visual, Modality::visual, cfg.visual_grid_rows(), cfg.visual_grid_cols());
    samples.push_back(std::move(s));
  }
  return samples;
}

// Checks the reverse-mode gradient of the full combined loss against central
// finite differences on randomly sampled parameter coordinates. A coordinate
// agrees when rel. err < rtol or the absolute gap sits below the oracle's
// noise floor.
template <class S>
GradAuditResult grad_audit_combined_loss(const GradAuditConfig& cfg) {
  RngStream root = RngStream::from_seed(cfg.seed);
  ModelState<S> st = init_model_state<S>(cfg.model, root.substream("init"));
  std::vector<TrainSample> samples = make_random_samples(cfg.model, cfg.batch_size,
                                                         root.substream("data"));
  std::vector<const TrainSample*> batch;
  for (const TrainSample& s : samples) batch.push_back(&s);
  std::vector<MaskPlan> plans;
  for (std::size_t slot = 0; slot < batch.size(); ++slot)
    plans.push_back(plan_for_sample(root, cfg.mask, 0, static_cast<int>(slot),
                                    cfg.model.audio_tokens(), cfg.model.visual_tokens()));

  zero_param_grads(st);
  BatchGraph<S> g = forward_batch(batch, plans, st, cfg.loss);
  g.total.backward();

  auto loss_value = [&]() -> double {
    NoGradGuard quiet;  // FD re-evaluations do not need a tape
    return static_cast<double>(forward_batch(batch, plans, st, cfg.loss).total.at(0));
  };

  GradAuditResult res;
  res.loss_value = static_cast<double>(g.total.at(0));
  RngStream pick = root.substream("gradaudit.coords");
  for (const ParamRef<S>& p : st.registry) {
    const std::size_t n = p.tensor.numel();
    const int k = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(cfg.coords_per_param)));
    for (int c = 0; c < k; ++c) {
      const std::size_t i = static_cast<std::size_t>(pick.next_below(n));
      std::vector<S>& w = *p.tensor.data;
      const S keep = w[i];
      w[i] = keep + static_cast<S>(cfg.eps);
      const double fp = loss_value();
      w[i] = keep - static_cast<S>(cfg.eps);
      const double fm = loss_value();
      w[i] = keep;
      const double fd = (fp - fm) / (2.0 * cfg.eps);
      const double an = static_cast<double>((*p.tensor.grad)[i]);
      const double rel = rel_err(an, fd);
      ++res.checked;
      if (rel >= cfg.rtol && std::abs(an - fd) >= cfg.atol) {
        ++res.failed;
        res.worst_rel = std::max(res.worst_rel, rel);
      }
    }
  }
  res.pass_fraction =
      res.checked == 0 ? 1.0 : 1.0 - static_cast<double>(res.failed) / static_cast<double>(res.checked);
  return res;
}

}  // namespace uav
