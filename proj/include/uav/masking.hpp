#pragma once

#include <utility>
#include <vector>

#include "uav/patchio.hpp"
#include "uav/rng.hpp"

namespace uav {

enum class MaskMode { asymmetric, symmetric, complementary };

MaskMode mask_mode_from_string(const std::string& s);
const char* mask_mode_name(MaskMode m);

struct MaskConfig {
  double lo = 0.3;
  double hi = 0.6;
  MaskMode mode = MaskMode::asymmetric;
};

// Masked/unmasked index partition of one token sequence. Both sets are sorted
// ascending; together they cover 0..T-1 exactly once.
struct MaskEntry {
  double ratio = 0.0;
  std::vector<int> masked;
  std::vector<int> unmasked;
};

// Per-iteration plan: one ratio pair shared by the whole batch, index sets
// drawn per sample.
struct MaskPlan {
  double ratio_audio = 0.0;
  double ratio_visual = 0.0;
  MaskEntry audio;
  MaskEntry visual;
};

// Draws the iteration's (audio, visual) masking ratio pair.
//   asymmetric    — two independent U(lo, hi) draws
//   symmetric     — one draw used for both
//   complementary — visual = lo + hi - audio (paired variant)
// Always consumes exactly two draws so the stream position per iteration is
// mode-independent.
std::pair<double, double> sample_ratios(RngStream& rng, const MaskConfig& cfg);

// Uniform subset of round-half-up(ratio * T) indices, clamped to [1, T-1] so
// both the contrastive pool and the reconstruction target stay non-empty.
MaskEntry sample_mask_indices(int token_count, double ratio, RngStream& rng);

// Splits a full token sequence into its unmasked remainder (original order,
// original grid indices preserved) and the index partition.
std::pair<TokenSequence, MaskEntry> apply_mask(const TokenSequence& t, double ratio, RngStream& rng);

// Row subset of a token sequence; keeps source grid indices so positional
// lookups still resolve.
TokenSequence select_tokens(const TokenSequence& t, const std::vector<int>& keep);

// Number of masked tokens implied by the rounding rule above.
int masked_count(int token_count, double ratio);

}  // namespace uav
