#include "uav/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uav/errors.hpp"

namespace uav {

MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "asymmetric") return MaskMode::asymmetric;
  if (s == "symmetric") return MaskMode::symmetric;
  if (s == "complementary") return MaskMode::complementary;
  throw ConfigError("mask.mode: unknown value '" + s + "'");
}

const char* mask_mode_name(MaskMode m) {
  switch (m) {
    case MaskMode::asymmetric: return "asymmetric";
    case MaskMode::symmetric: return "symmetric";
    default: return "complementary";
  }
}

std::pair<double, double> sample_ratios(RngStream& rng, const MaskConfig& cfg) {
  if (!(cfg.lo > 0.0 && cfg.lo <= cfg.hi && cfg.hi < 1.0))
    throw ConfigError("sample_ratios: need 0 < mask.lo <= mask.hi < 1");
  const double a = rng.uniform(cfg.lo, cfg.hi);
  const double b = rng.uniform(cfg.lo, cfg.hi);  // consumed in every mode
  switch (cfg.mode) {
    case MaskMode::asymmetric: return {a, b};
    case MaskMode::symmetric: return {a, a};
    default: return {a, cfg.lo + cfg.hi - a};
  }
}

int masked_count(int token_count, double ratio) {
  const int n = static_cast<int>(std::floor(ratio * token_count + 0.5));
  return std::clamp(n, 1, token_count - 1);
}

MaskEntry sample_mask_indices(int token_count, double ratio, RngStream& rng) {
  if (token_count < 2)
    throw PreconditionError("sample_mask_indices: need at least 2 tokens, got " +
                            std::to_string(token_count));
  const int n_masked = masked_count(token_count, ratio);
  // partial Fisher-Yates: first n_masked slots become the masked set
  std::vector<int> order(static_cast<std::size_t>(token_count));
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < n_masked; ++i) {
    const int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(token_count - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  MaskEntry e;
  e.ratio = ratio;
  e.masked.assign(order.begin(), order.begin() + n_masked);
  std::sort(e.masked.begin(), e.masked.end());
  e.unmasked.reserve(static_cast<std::size_t>(token_count - n_masked));
  std::size_t m = 0;
  for (int i = 0; i < token_count; ++i) {
    if (m < e.masked.size() && e.masked[m] == i)
      ++m;
    else
      e.unmasked.push_back(i);
  }
  return e;
}

TokenSequence select_tokens(const TokenSequence& t, const std::vector<int>& keep) {
  TokenSequence u;
  u.modality = t.modality;
  u.patch_size = t.patch_size;
  u.grid_rows = t.grid_rows;
  u.grid_cols = t.grid_cols;
  u.token_dim = t.token_dim;
  u.tokens.resize(keep.size() * static_cast<std::size_t>(t.token_dim));
  u.source_index.resize(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const int src = keep[k];
    if (src < 0 || src >= t.count())
      throw GeometryError("select_tokens: index " + std::to_string(src) + " out of range");
    u.source_index[k] = t.source_index[static_cast<std::size_t>(src)];
    std::copy_n(t.row(src), t.token_dim, u.tokens.data() + k * static_cast<std::size_t>(t.token_dim));
  }
  return u;
}

std::pair<TokenSequence, MaskEntry> apply_mask(const TokenSequence& t, double ratio, RngStream& rng) {
  MaskEntry e = sample_mask_indices(t.count(), ratio, rng);
  return {select_tokens(t, e.unmasked), std::move(e)};
}

}  // namespace uav
