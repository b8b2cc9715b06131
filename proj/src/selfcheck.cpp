#include "uav/selfcheck.hpp"

#include <cmath>

#include "uav/gradaudit.hpp"
#include "uav/metrics.hpp"
#include "uav/metrics_oracle.hpp"
#include "uav/trainer.hpp"

namespace uav {

namespace {

// Toy shape for gradient checks: small enough for dense FD, every module on
// the path (masking, shared encode, pooling, joint encode/decode, both losses).
GradAuditConfig toy_audit_config(std::uint64_t seed) {
  GradAuditConfig cfg;
  cfg.model.dim = 8;
  cfg.model.depth = 2;
  cfg.model.heads = 2;
  cfg.model.patch_size = 2;
  cfg.model.visual_height = 4;
  cfg.model.visual_width = 4;
  cfg.model.audio_height = 4;
  cfg.model.audio_width = 4;
  cfg.model.decoder_dim = 8;
  cfg.loss.tau = 0.2;     // softer logits keep the toy loss well-conditioned
  cfg.loss.lambda = 1.0;  // both branches contribute O(1) gradients
  cfg.batch_size = 2;
  cfg.seed = seed;
  return cfg;
}

nlohmann::json audit_to_json(const GradAuditResult& r, double min_pass_fraction) {
  nlohmann::json j;
  j["checked"] = r.checked;
  j["failed"] = r.failed;
  j["pass_fraction"] = r.pass_fraction;
  j["worst_rel_err"] = r.worst_rel;
  j["loss"] = r.loss_value;
  j["pass"] = r.pass_fraction >= min_pass_fraction;
  return j;
}

}  // namespace

nlohmann::json selfcheck_gradients(std::uint64_t seed, int coords_per_param) {
  GradAuditConfig f32 = toy_audit_config(seed);
  f32.coords_per_param = coords_per_param;
  f32.eps = 1e-3;
  f32.rtol = 1e-3;
  f32.atol = 5e-4;
  GradAuditConfig f64 = f32;
  f64.eps = 1e-6;
  f64.rtol = 1e-6;
  f64.atol = 5e-9;

  nlohmann::json j;
  j["f32"] = audit_to_json(grad_audit_combined_loss<float>(f32), 0.99);
  j["f64"] = audit_to_json(grad_audit_combined_loss<double>(f64), 0.99);
  j["pass"] = j["f32"]["pass"].get<bool>() && j["f64"]["pass"].get<bool>();
  return j;
}

nlohmann::json selfcheck_masking(std::uint64_t seed, int iterations) {
  MaskConfig cfg;  // asymmetric, [0.3, 0.6]
  RngStream root = RngStream::from_seed(seed);
  double sum_a = 0.0, sum_v = 0.0;
  bool in_bounds = true;
  for (int i = 0; i < iterations; ++i) {
    auto [ra, rv] = ratios_for_step(root, cfg, static_cast<std::uint64_t>(i));
    in_bounds = in_bounds && ra >= cfg.lo && ra <= cfg.hi && rv >= cfg.lo && rv <= cfg.hi;
    sum_a += ra;
    sum_v += rv;
  }
  const double mean_a = sum_a / iterations;
  const double mean_v = sum_v / iterations;
  const double mid = 0.5 * (cfg.lo + cfg.hi);
  nlohmann::json j;
  j["iterations"] = iterations;
  j["mean_audio"] = mean_a;
  j["mean_visual"] = mean_v;
  j["all_in_bounds"] = in_bounds;
  j["pass"] = in_bounds && std::abs(mean_a - mid) < 0.01 && std::abs(mean_v - mid) < 0.01 &&
              std::abs(mean_a - mean_v) < 0.01;
  return j;
}

nlohmann::json selfcheck_metric_oracles(std::uint64_t seed, int n_sets, int set_size) {
  RngStream rng = RngStream::from_seed(seed).substream("metric.oracle");
  double worst_eer_gap = 0.0, worst_dcf_gap = 0.0;
  for (int k = 0; k < n_sets; ++k) {
    ScoreSet s;
    s.items.reserve(static_cast<std::size_t>(set_size));
    for (int i = 0; i < set_size; ++i)
      s.items.push_back({rng.uniform(-1.0, 1.0), rng.uniform01() < 0.5 ? 1 : 0});
    // guard both classes
    s.items[0].label = 1;
    s.items[1].label = 0;
    worst_eer_gap = std::max(worst_eer_gap, std::abs(compute_eer(s).eer - bruteforce_eer(s)));
    worst_dcf_gap = std::max(worst_dcf_gap, std::abs(compute_min_dcf(s, 0.01, 1.0, 1.0).dcf -
                                                     bruteforce_min_dcf(s, 0.01, 1.0, 1.0)));
  }
  // label-random scores should sit at chance
  ScoreSet chance;
  for (int i = 0; i < 10000; ++i)
    chance.items.push_back({rng.uniform(-1.0, 1.0), rng.uniform01() < 0.5 ? 1 : 0});
  chance.items[0].label = 1;
  chance.items[1].label = 0;
  const double chance_eer = compute_eer(chance).eer;

  nlohmann::json j;
  j["sets"] = n_sets;
  j["set_size"] = set_size;
  j["worst_eer_gap"] = worst_eer_gap;
  j["worst_dcf_gap"] = worst_dcf_gap;
  j["chance_eer"] = chance_eer;
  j["pass"] = worst_eer_gap < 1e-9 && worst_dcf_gap < 1e-9 && std::abs(chance_eer - 0.5) < 0.03;
  return j;
}

nlohmann::json run_selfcheck(std::uint64_t seed) {
  nlohmann::json j;
  j["gradient_check"] = selfcheck_gradients(seed, 6);
  j["masking_statistics"] = selfcheck_masking(seed, 10000);
  j["metric_oracles"] = selfcheck_metric_oracles(seed, 20, 500);
  j["pass"] = j["gradient_check"]["pass"].get<bool>() &&
              j["masking_statistics"]["pass"].get<bool>() &&
              j["metric_oracles"]["pass"].get<bool>();
  return j;
}

}  // namespace uav
