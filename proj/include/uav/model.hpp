#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "uav/errors.hpp"
#include "uav/masking.hpp"
#include "uav/ops.hpp"
#include "uav/patchio.hpp"
#include "uav/rng.hpp"
#include "uav/tensor.hpp"

namespace uav {

struct ModelConfig {
  int dim = 64;
  int depth = 4;
  int heads = 4;
  int patch_size = 16;
  int visual_height = 64;
  int visual_width = 64;
  int audio_height = 64;
  int audio_width = 64;
  int joint_encoder_depth = 2;
  int joint_decoder_depth = 6;
  int decoder_dim = 48;

  int token_dim() const { return patch_size * patch_size * 3; }
  int visual_grid_rows() const { return visual_height / patch_size; }
  int visual_grid_cols() const { return visual_width / patch_size; }
  int audio_grid_rows() const { return audio_height / patch_size; }
  int audio_grid_cols() const { return audio_width / patch_size; }
  int visual_tokens() const { return visual_grid_rows() * visual_grid_cols(); }
  int audio_tokens() const { return audio_grid_rows() * audio_grid_cols(); }

  void validate() const {
    if (dim < 1) throw ConfigError("model.dim: must be positive");
    if (depth < 0) throw ConfigError("model.depth: must be non-negative");
    if (heads < 1) throw ConfigError("model.heads: must be positive");
    if (dim % heads != 0) throw ConfigError("model.dim: must be divisible by model.heads");
    if (decoder_dim < 1) throw ConfigError("model.decoder_dim: must be positive");
    if (decoder_dim % heads != 0)
      throw ConfigError("model.decoder_dim: must be divisible by model.heads");
    if (patch_size < 1) throw ConfigError("model.patch_size: must be positive");
    if (visual_height % patch_size != 0 || visual_width % patch_size != 0)
      throw ConfigError("model.visual_height/visual_width: must be divisible by patch_size");
    if (audio_height % patch_size != 0 || audio_width % patch_size != 0)
      throw ConfigError("model.audio_height/audio_width: must be divisible by patch_size");
    if (visual_tokens() < 2) throw ConfigError("model.visual grid: needs at least 2 tokens");
    if (audio_tokens() < 2) throw ConfigError("model.audio grid: needs at least 2 tokens");
    if (joint_encoder_depth < 0) throw ConfigError("model.joint_encoder_depth: must be non-negative");
    if (joint_decoder_depth < 0) throw ConfigError("model.joint_decoder_depth: must be non-negative");
  }
};

template <class S>
struct ParamRef {
  std::string name;
  Tensor<S> tensor;
  bool discardable = false;  // not needed once joint encoder/decoder are dropped
};

// Full parameter set. One copy of the patch projection and backbone serves
// both modalities; positional and modality-type embeddings are per-modality.
template <class S>
struct ModelState {
  ModelConfig cfg;

  Tensor<S> proj_w, proj_b;                    // [P*P*3, D], [D]
  std::vector<BlockParams<S>> backbone;        // x depth, width D
  Tensor<S> pos_audio, pos_visual;             // [N, D], [M, D]
  Tensor<S> type_audio, type_visual;           // [D] each, joint-stage tags
  std::vector<BlockParams<S>> joint_encoder;   // x joint_encoder_depth, width D
  Tensor<S> adapter_w, adapter_b;              // [D, dec], [dec]
  Tensor<S> mask_token;                        // [dec]
  Tensor<S> dec_pos_audio, dec_pos_visual;     // [N, dec], [M, dec]
  Tensor<S> dec_type_audio, dec_type_visual;   // [dec] each
  std::vector<BlockParams<S>> joint_decoder;   // x joint_decoder_depth, width dec
  Tensor<S> out_w, out_b;                      // [dec, P*P*3], [P*P*3]

  std::vector<ParamRef<S>> registry;  // stable construction order
};

namespace detail {

template <class S>
Tensor<S> init_weight(std::vector<int> shape, RngStream& rng, double stddev) {
  Tensor<S> t = Tensor<S>::zeros(std::move(shape), true);
  for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = static_cast<S>(rng.truncated_normal(stddev));
  return t;
}

template <class S>
Tensor<S> init_const(std::vector<int> shape, S value) {
  Tensor<S> t = Tensor<S>::zeros(std::move(shape), true);
  for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = value;
  return t;
}

template <class S>
BlockParams<S> init_block(int width, RngStream& rng, double stddev) {
  BlockParams<S> b;
  b.ln1_g = init_const<S>({width}, S(1));
  b.ln1_b = init_const<S>({width}, S(0));
  b.qkv_w = init_weight<S>({width, 3 * width}, rng, stddev);
  b.qkv_b = init_const<S>({3 * width}, S(0));
  b.attn_w = init_weight<S>({width, width}, rng, stddev);
  b.attn_b = init_const<S>({width}, S(0));
  b.ln2_g = init_const<S>({width}, S(1));
  b.ln2_b = init_const<S>({width}, S(0));
  b.fc1_w = init_weight<S>({width, 4 * width}, rng, stddev);
  b.fc1_b = init_const<S>({4 * width}, S(0));
  b.fc2_w = init_weight<S>({4 * width, width}, rng, stddev);
  b.fc2_b = init_const<S>({width}, S(0));
  return b;
}

template <class S>
void register_block(std::vector<ParamRef<S>>& reg, const std::string& prefix, BlockParams<S>& b,
                    bool discardable) {
  reg.push_back({prefix + ".ln1.g", b.ln1_g, discardable});
  reg.push_back({prefix + ".ln1.b", b.ln1_b, discardable});
  reg.push_back({prefix + ".qkv.w", b.qkv_w, discardable});
  reg.push_back({prefix + ".qkv.b", b.qkv_b, discardable});
  reg.push_back({prefix + ".attn.w", b.attn_w, discardable});
  reg.push_back({prefix + ".attn.b", b.attn_b, discardable});
  reg.push_back({prefix + ".ln2.g", b.ln2_g, discardable});
  reg.push_back({prefix + ".ln2.b", b.ln2_b, discardable});
  reg.push_back({prefix + ".fc1.w", b.fc1_w, discardable});
  reg.push_back({prefix + ".fc1.b", b.fc1_b, discardable});
  reg.push_back({prefix + ".fc2.w", b.fc2_w, discardable});
  reg.push_back({prefix + ".fc2.b", b.fc2_b, discardable});
}

}  // namespace detail

template <class S>
ModelState<S> init_model_state(const ModelConfig& cfg, RngStream init_rng) {
  cfg.validate();
  constexpr double kStd = 0.02;
  ModelState<S> st;
  st.cfg = cfg;
  const int D = cfg.dim, dec = cfg.decoder_dim;
  const int M = cfg.visual_tokens(), N = cfg.audio_tokens();

  st.proj_w = detail::init_weight<S>({cfg.token_dim(), D}, init_rng, kStd);
  st.proj_b = detail::init_const<S>({D}, S(0));
  for (int i = 0; i < cfg.depth; ++i) st.backbone.push_back(detail::init_block<S>(D, init_rng, kStd));
  st.pos_audio = detail::init_weight<S>({N, D}, init_rng, kStd);
  st.pos_visual = detail::init_weight<S>({M, D}, init_rng, kStd);
  st.type_audio = detail::init_weight<S>({D}, init_rng, kStd);
  st.type_visual = detail::init_weight<S>({D}, init_rng, kStd);
  for (int i = 0; i < cfg.joint_encoder_depth; ++i)
    st.joint_encoder.push_back(detail::init_block<S>(D, init_rng, kStd));
  st.adapter_w = detail::init_weight<S>({D, dec}, init_rng, kStd);
  st.adapter_b = detail::init_const<S>({dec}, S(0));
  st.mask_token = detail::init_weight<S>({dec}, init_rng, kStd);
  st.dec_pos_audio = detail::init_weight<S>({N, dec}, init_rng, kStd);
  st.dec_pos_visual = detail::init_weight<S>({M, dec}, init_rng, kStd);
  st.dec_type_audio = detail::init_weight<S>({dec}, init_rng, kStd);
  st.dec_type_visual = detail::init_weight<S>({dec}, init_rng, kStd);
  for (int i = 0; i < cfg.joint_decoder_depth; ++i)
    st.joint_decoder.push_back(detail::init_block<S>(dec, init_rng, kStd));
  st.out_w = detail::init_weight<S>({dec, cfg.token_dim()}, init_rng, kStd);
  st.out_b = detail::init_const<S>({cfg.token_dim()}, S(0));

  auto& reg = st.registry;
  reg.push_back({"proj.w", st.proj_w, false});
  reg.push_back({"proj.b", st.proj_b, false});
  for (int i = 0; i < cfg.depth; ++i)
    detail::register_block(reg, "backbone." + std::to_string(i), st.backbone[static_cast<std::size_t>(i)], false);
  reg.push_back({"pos.audio", st.pos_audio, false});
  reg.push_back({"pos.visual", st.pos_visual, false});
  reg.push_back({"type.audio", st.type_audio, true});
  reg.push_back({"type.visual", st.type_visual, true});
  for (int i = 0; i < cfg.joint_encoder_depth; ++i)
    detail::register_block(reg, "joint_enc." + std::to_string(i), st.joint_encoder[static_cast<std::size_t>(i)], true);
  reg.push_back({"dec.adapter.w", st.adapter_w, true});
  reg.push_back({"dec.adapter.b", st.adapter_b, true});
  reg.push_back({"dec.mask_token", st.mask_token, true});
  reg.push_back({"dec.pos.audio", st.dec_pos_audio, true});
  reg.push_back({"dec.pos.visual", st.dec_pos_visual, true});
  reg.push_back({"dec.type.audio", st.dec_type_audio, true});
  reg.push_back({"dec.type.visual", st.dec_type_visual, true});
  for (int i = 0; i < cfg.joint_decoder_depth; ++i)
    detail::register_block(reg, "joint_dec." + std::to_string(i), st.joint_decoder[static_cast<std::size_t>(i)], true);
  reg.push_back({"dec.out.w", st.out_w, true});
  reg.push_back({"dec.out.b", st.out_b, true});
  return st;
}

// Patch projection + positional embedding (gathered at the tokens' original
// grid indices) + the shared backbone. Audio and visual pass through the same
// projection and block parameters; only the positional table differs.
template <class S>
Tensor<S> encode(const TokenSequence& t, const ModelState<S>& st) {
  if (t.token_dim != st.cfg.token_dim())
    throw DimensionError("encode: token width " + std::to_string(t.token_dim) +
                         " does not match config " + std::to_string(st.cfg.token_dim()));
  if (t.count() < 1) throw PreconditionError("encode: empty token sequence");
  const Tensor<S>& pos = t.modality == Modality::audio ? st.pos_audio : st.pos_visual;
  const int grid_total = t.modality == Modality::audio ? st.cfg.audio_tokens() : st.cfg.visual_tokens();
  for (int idx : t.source_index)
    if (idx < 0 || idx >= grid_total)
      throw GeometryError("encode: grid index " + std::to_string(idx) + " out of range");
  Tensor<S> x = Tensor<S>::from_cast({t.count(), t.token_dim}, t.tokens);
  x = add(linear(x, st.proj_w, st.proj_b), gather_rows(pos, t.source_index));
  for (const BlockParams<S>& b : st.backbone) x = transformer_block(x, b, st.cfg.heads);
  check_finite(x, "encode");
  return x;
}

// Mean over unmasked-token features: the modality's global representation.
template <class S>
Tensor<S> pool_embedding(const Tensor<S>& features) {
  expect_matrix(features, "pool_embedding");
  if (features.rows() < 1) throw PreconditionError("pool_embedding: empty pool");
  return mean_pool(features);
}

// Tags backbone features with modality-type + positional embeddings,
// concatenates audio-then-visual, and runs the joint encoder blocks.
template <class S>
Tensor<S> joint_encode(const Tensor<S>& feat_audio, const std::vector<int>& idx_audio,
                       const Tensor<S>& feat_visual, const std::vector<int>& idx_visual,
                       const ModelState<S>& st) {
  expect_matrix(feat_audio, "joint_encode");
  expect_matrix(feat_visual, "joint_encode");
  if (feat_audio.cols() != st.cfg.dim || feat_visual.cols() != st.cfg.dim)
    throw DimensionError("joint_encode: feature width must equal model dim");
  if (feat_audio.rows() != static_cast<int>(idx_audio.size()) ||
      feat_visual.rows() != static_cast<int>(idx_visual.size()))
    throw GeometryError("joint_encode: index count must match feature rows");
  Tensor<S> a = add_rowvec(add(feat_audio, gather_rows(st.pos_audio, idx_audio)), st.type_audio);
  Tensor<S> v = add_rowvec(add(feat_visual, gather_rows(st.pos_visual, idx_visual)), st.type_visual);
  Tensor<S> joint = concat_rows<S>({a, v});
  for (const BlockParams<S>& b : st.joint_encoder) joint = transformer_block(joint, b, st.cfg.heads);
  check_finite(joint, "joint_encode");
  return joint;
}

template <class S>
struct Reconstruction {
  Tensor<S> audio;   // [N, P*P*3]
  Tensor<S> visual;  // [M, P*P*3]
};

// Inserts the trainable mask token at masked positions, adds decoder-side
// positional and type embeddings, runs the decoder blocks, and projects back
// to patch space. Output is full-length for both modalities.
template <class S>
Reconstruction<S> joint_decode(const Tensor<S>& joint, const MaskPlan& plan, const ModelState<S>& st) {
  const int N = st.cfg.audio_tokens(), M = st.cfg.visual_tokens();
  const int n_u = static_cast<int>(plan.audio.unmasked.size());
  const int m_u = static_cast<int>(plan.visual.unmasked.size());
  if (static_cast<int>(plan.audio.masked.size()) + n_u != N ||
      static_cast<int>(plan.visual.masked.size()) + m_u != M)
    throw GeometryError("joint_decode: mask plan does not partition the token grids");
  if (joint.rows() != n_u + m_u)
    throw GeometryError("joint_decode: joint length " + std::to_string(joint.rows()) +
                        " != unmasked total " + std::to_string(n_u + m_u));

  Tensor<S> adapted = linear(joint, st.adapter_w, st.adapter_b);
  std::vector<int> head(static_cast<std::size_t>(n_u));
  std::iota(head.begin(), head.end(), 0);
  std::vector<int> tail(static_cast<std::size_t>(m_u));
  std::iota(tail.begin(), tail.end(), n_u);
  Tensor<S> a_rows = gather_rows(adapted, head);
  Tensor<S> v_rows = gather_rows(adapted, tail);

  Tensor<S> full_a = scatter_rows_fill(a_rows, plan.audio.unmasked, st.mask_token, N);
  full_a = add_rowvec(add(full_a, st.dec_pos_audio), st.dec_type_audio);
  Tensor<S> full_v = scatter_rows_fill(v_rows, plan.visual.unmasked, st.mask_token, M);
  full_v = add_rowvec(add(full_v, st.dec_pos_visual), st.dec_type_visual);

  Tensor<S> x = concat_rows<S>({full_a, full_v});
  for (const BlockParams<S>& b : st.joint_decoder) x = transformer_block(x, b, st.cfg.heads);
  Tensor<S> out = linear(x, st.out_w, st.out_b);
  check_finite(out, "joint_decode");

  std::vector<int> ia(static_cast<std::size_t>(N));
  std::iota(ia.begin(), ia.end(), 0);
  std::vector<int> iv(static_cast<std::size_t>(M));
  std::iota(iv.begin(), iv.end(), N);
  return {gather_rows(out, ia), gather_rows(out, iv)};
}

enum class CountMode { shared, dual_hypothetical };

inline bool is_backbone_or_projection(const std::string& name) {
  return name.rfind("proj.", 0) == 0 || name.rfind("backbone.", 0) == 0;
}

// Trainable-parameter count. The dual-hypothetical mode prices a conventional
// two-encoder setup with identical dims: the shared backbone and patch
// projection are paid twice, everything else once.
template <class S>
std::int64_t count_parameters(const ModelState<S>& st, CountMode mode) {
  std::int64_t total = 0, shared_part = 0;
  for (const ParamRef<S>& p : st.registry) {
    const std::int64_t n = static_cast<std::int64_t>(p.tensor.numel());
    total += n;
    if (is_backbone_or_projection(p.name)) shared_part += n;
  }
  return mode == CountMode::shared ? total : total + shared_part;
}

// Same count from shapes alone; no weights are materialized, so arbitrarily
// large configs price out instantly. Must agree with the state-based count.
std::int64_t count_parameters_config(const ModelConfig& cfg, CountMode mode);

}  // namespace uav
