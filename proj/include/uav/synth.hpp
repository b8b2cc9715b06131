#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uav/patchio.hpp"

namespace uav {

// Synthetic paired audio-visual corpus: one latent per speaker, two fixed
// random linear maps into pixel/spectrogram space, per-sample noise on top.
// Deterministic in the seed.
struct SynthSpec {
  int n_speakers = 8;
  int samples_per_speaker = 8;
  int latent_dim = 16;
  double noise_std = 0.02;
  std::uint64_t seed = 7;
  int visual_height = 64, visual_width = 64;
  int audio_height = 64, audio_width = 64;
  std::string speaker_prefix = "spk";
  // Speaker identities are keyed by (seed, offset + index): an eval split with
  // the same seed and offset >= n_speakers shares the generative maps but has
  // disjoint speakers.
  int speaker_index_offset = 0;

  void validate() const;
};

struct SynthResult {
  std::string manifest_path;
  int n_samples = 0;
  int n_files = 0;
};

// Writes UAVT tensors under out_dir/{img,spec}/ plus a JSON-lines manifest.
SynthResult generate_synthetic(const SynthSpec& spec, const std::string& out_dir,
                               const std::string& manifest_name = "manifest.jsonl");

// All-pairs verification trials over a manifest: label 1 when speakers match.
// Format: "label id1 id2" per line.
void write_all_pairs_trials(const std::vector<ManifestRow>& rows, const std::string& path);

}  // namespace uav
