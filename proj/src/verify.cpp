#include "uav/verify.hpp"

#include <algorithm>
#include <cmath>

#include "uav/errors.hpp"
#include "uav/ops.hpp"

namespace uav {

EmbedMode embed_mode_from_string(const std::string& s) {
  if (s == "audio") return EmbedMode::audio;
  if (s == "visual") return EmbedMode::visual;
  if (s == "audiovisual") return EmbedMode::audiovisual;
  throw ConfigError("mode: unknown value '" + s + "' (audio|visual|audiovisual)");
}

const char* embed_mode_name(EmbedMode m) {
  switch (m) {
    case EmbedMode::audio: return "audio";
    case EmbedMode::visual: return "visual";
    default: return "audiovisual";
  }
}

namespace {

std::vector<float> pooled_values(const TokenSequence& tokens, const ModelState<float>& st) {
  Tensor<float> pooled = pool_embedding(encode(tokens, st));
  check_finite(pooled, "embed");
  return *pooled.data;
}

std::vector<float> embed_visual(const RawInput& image, const ModelState<float>& st) {
  return pooled_values(patchify(image, st.cfg.patch_size), st);
}

std::vector<float> embed_audio(const RawInput& spectrogram, const ModelState<float>& st) {
  const RawInput inflated =
      spectrogram.channels == 1 ? inflate_channels(spectrogram) : spectrogram;
  return pooled_values(patchify(inflated, st.cfg.patch_size), st);
}

}  // namespace

Embedding embed(const RawInput* image, const RawInput* spectrogram, EmbedMode mode,
                const ModelState<float>& st) {
  NoGradGuard no_grad;
  Embedding e;
  e.mode = mode;
  switch (mode) {
    case EmbedMode::audio:
      if (!spectrogram) throw ModalityError("embed: audio mode needs a spectrogram input");
      e.values = embed_audio(*spectrogram, st);
      break;
    case EmbedMode::visual:
      if (!image) throw ModalityError("embed: visual mode needs an image input");
      e.values = embed_visual(*image, st);
      break;
    case EmbedMode::audiovisual: {
      if (!image || !spectrogram)
        throw ModalityError("embed: audiovisual mode needs both inputs");
      const std::vector<float> a = embed_audio(*spectrogram, st);
      const std::vector<float> v = embed_visual(*image, st);
      e.values.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) e.values[i] = (a[i] + v[i]) * 0.5f;
      break;
    }
  }
  return e;
}

double score(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size() || a.empty())
    throw DimensionError("score: embeddings must have equal nonzero length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0))
    throw DegenerateEmbeddingError("score: zero-norm embedding");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace uav
