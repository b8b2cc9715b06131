#pragma once

#include <string>
#include <vector>

#include "uav/model.hpp"
#include "uav/patchio.hpp"

namespace uav {

enum class EmbedMode { audio, visual, audiovisual };

EmbedMode embed_mode_from_string(const std::string& s);
const char* embed_mode_name(EmbedMode m);

struct Embedding {
  std::vector<float> values;  // dimension D in every mode
  EmbedMode mode = EmbedMode::audiovisual;
};

// Inference-time embedding: all tokens are encoded (no masking) by the shared
// backbone and mean-pooled. Audiovisual is the exact elementwise mean of the
// two unimodal embeddings. The joint encoder/decoder are never touched, so a
// decoder-stripped checkpoint suffices.
Embedding embed(const RawInput* image, const RawInput* spectrogram, EmbedMode mode,
                const ModelState<float>& st);

// Cosine similarity in [-1, 1].
double score(const std::vector<float>& a, const std::vector<float>& b);

}  // namespace uav
