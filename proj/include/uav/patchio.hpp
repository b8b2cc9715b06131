#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace uav {

enum class Modality { audio, visual };

inline const char* modality_name(Modality m) { return m == Modality::audio ? "audio" : "visual"; }

// Raw tensor file contents: dims straight from the header, payload row-major f32.
struct UavtFile {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

// UAVT binary format, bit-exact:
//   magic "UAVT" | version u8 = 1 | dtype u8 (0 = f32) | ndim u8 | reserved u8
//   | ndim x u32 little-endian dims | payload little-endian f32 row-major
void save_uavt(const std::string& path, const UavtFile& file);
UavtFile load_uavt(const std::string& path);

// One 2-d input as the model sees it: H x W x C row-major, C innermost.
struct RawInput {
  Modality modality = Modality::visual;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  float at(int i, int j, int c) const {
    return data[(static_cast<std::size_t>(i) * width + j) * channels + c];
  }
};

// Ordered patch tokens for one modality. `source_index` maps each row back to
// its original grid position (identity for a fresh patchify; a subset after
// masking) so positional embeddings can be gathered correctly.
struct TokenSequence {
  Modality modality = Modality::visual;
  int patch_size = 0;
  int grid_rows = 0;
  int grid_cols = 0;
  int token_dim = 0;  // patch_size * patch_size * 3
  std::vector<float> tokens;  // [count, token_dim] row-major
  std::vector<int> source_index;

  int count() const { return static_cast<int>(source_index.size()); }
  const float* row(int t) const { return tokens.data() + static_cast<std::size_t>(t) * token_dim; }
};

// Modality is caller-supplied; channel counts are validated by the ops that
// care (inflate wants 1, patchify wants 3).
RawInput load_tensor(const std::string& path, Modality modality);
void save_tensor(const std::string& path, const RawInput& input);

std::vector<float> load_vector(const std::string& path);
void save_vector(const std::string& path, const std::vector<float>& values);

// Spectrogram channel inflation: 1 -> 3 by simple repetition.
RawInput inflate_channels(const RawInput& x);

// Non-overlapping P x P x 3 patches, row-major over the (H/P, W/P) grid.
TokenSequence patchify(const RawInput& x, int patch_size);

// Exact inverse of patchify; requires a complete, identity-ordered sequence.
RawInput unpatchify(const TokenSequence& t);

// Dataset manifest: JSON-lines, one record per sample
//   {"id": str, "speaker": str, "image": path, "spectrogram": path}
// Relative paths are resolved against the manifest's directory.
struct ManifestRow {
  std::string id;
  std::string speaker;
  std::string image_path;
  std::string spectrogram_path;
};

std::vector<ManifestRow> load_manifest(const std::string& path);

}  // namespace uav
