#include "uav/model.hpp"

namespace uav {

namespace {

std::int64_t block_param_count(std::int64_t w) {
  const std::int64_t ln = 2 * w;
  const std::int64_t qkv = w * 3 * w + 3 * w;
  const std::int64_t attn = w * w + w;
  const std::int64_t mlp = w * 4 * w + 4 * w + 4 * w * w + w;
  return 2 * ln + qkv + attn + mlp;
}

}  // namespace

std::int64_t count_parameters_config(const ModelConfig& cfg, CountMode mode) {
  cfg.validate();
  const std::int64_t D = cfg.dim, dec = cfg.decoder_dim, td = cfg.token_dim();
  const std::int64_t M = cfg.visual_tokens(), N = cfg.audio_tokens();
  const std::int64_t proj = td * D + D;
  const std::int64_t backbone = cfg.depth * block_param_count(D);
  std::int64_t total = proj + backbone;
  total += (N + M) * D;              // positional tables
  total += 2 * D;                    // modality-type embeddings
  total += cfg.joint_encoder_depth * block_param_count(D);
  total += D * dec + dec;            // adapter
  total += dec;                      // mask token
  total += (N + M) * dec + 2 * dec;  // decoder positional + type
  total += cfg.joint_decoder_depth * block_param_count(dec);
  total += dec * td + td;            // output projection
  return mode == CountMode::shared ? total : total + proj + backbone;
}

}  // namespace uav
