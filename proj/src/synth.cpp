#include "uav/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "uav/errors.hpp"
#include "uav/rng.hpp"

namespace uav {

void SynthSpec::validate() const {
  if (n_speakers < 1) throw ConfigError("synth.n_speakers: must be positive");
  if (samples_per_speaker < 1) throw ConfigError("synth.samples_per_speaker: must be positive");
  if (latent_dim < 1) throw ConfigError("synth.latent_dim: must be positive");
  if (noise_std < 0.0) throw ConfigError("synth.noise_std: must be non-negative");
  if (visual_height < 1 || visual_width < 1 || audio_height < 1 || audio_width < 1)
    throw ConfigError("synth: all input dims must be positive");
}

namespace {

// Fixed random map latent -> flat output, entries N(0, 1/latent_dim).
std::vector<float> make_map(RngStream rng, std::size_t out_size, int latent_dim) {
  std::vector<float> m(out_size * static_cast<std::size_t>(latent_dim));
  const double s = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  for (float& v : m) v = static_cast<float>(rng.normal() * s);
  return m;
}

std::vector<float> apply_map(const std::vector<float>& map, const std::vector<float>& z,
                             std::size_t out_size, RngStream noise_rng, double noise_std) {
  std::vector<float> out(out_size);
  const std::size_t L = z.size();
  for (std::size_t p = 0; p < out_size; ++p) {
    double acc = 0.0;
    const float* row = map.data() + p * L;
    for (std::size_t k = 0; k < L; ++k) acc += static_cast<double>(row[k]) * z[k];
    if (noise_std > 0.0) acc += noise_std * noise_rng.normal();
    out[p] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace

SynthResult generate_synthetic(const SynthSpec& spec, const std::string& out_dir,
                               const std::string& manifest_name) {
  spec.validate();
  namespace fs = std::filesystem;
  const fs::path out(out_dir);
  std::error_code ec;
  fs::create_directories(out / "img", ec);
  fs::create_directories(out / "spec", ec);
  if (ec) throw IoError("generate_synthetic: cannot create " + out_dir);

  RngStream root = RngStream::from_seed(spec.seed);
  const std::size_t vis_size = static_cast<std::size_t>(spec.visual_height) * spec.visual_width * 3;
  const std::size_t aud_size = static_cast<std::size_t>(spec.audio_height) * spec.audio_width;
  const std::vector<float> map_v = make_map(root.substream("synth.map.visual"), vis_size, spec.latent_dim);
  const std::vector<float> map_a = make_map(root.substream("synth.map.audio"), aud_size, spec.latent_dim);

  const std::string manifest_path = (out / manifest_name).string();
  std::ofstream manifest(manifest_path);
  if (!manifest) throw IoError("generate_synthetic: cannot open " + manifest_path);

  SynthResult result;
  result.manifest_path = manifest_path;
  for (int s = 0; s < spec.n_speakers; ++s) {
    const std::uint64_t global_s = static_cast<std::uint64_t>(spec.speaker_index_offset + s);
    RngStream sp = root.substream("synth.speaker", global_s);
    std::vector<float> z(static_cast<std::size_t>(spec.latent_dim));
    RngStream zr = sp.substream("latent");
    for (float& v : z) v = static_cast<float>(zr.normal());
    const std::string speaker = spec.speaker_prefix + std::to_string(s);
    for (int i = 0; i < spec.samples_per_speaker; ++i) {
      const std::string id = speaker + "_s" + std::to_string(i);

      RawInput image;
      image.modality = Modality::visual;
      image.height = spec.visual_height;
      image.width = spec.visual_width;
      image.channels = 3;
      image.data = apply_map(map_v, z, vis_size,
                             sp.substream("noise.visual", static_cast<std::uint64_t>(i)),
                             spec.noise_std);

      RawInput spectrogram;
      spectrogram.modality = Modality::audio;
      spectrogram.height = spec.audio_height;
      spectrogram.width = spec.audio_width;
      spectrogram.channels = 1;
      spectrogram.data = apply_map(map_a, z, aud_size,
                                   sp.substream("noise.audio", static_cast<std::uint64_t>(i)),
                                   spec.noise_std);

      const std::string img_rel = "img/" + id + ".uavt";
      const std::string spec_rel = "spec/" + id + ".uavt";
      save_tensor((out / img_rel).string(), image);
      save_tensor((out / spec_rel).string(), spectrogram);
      result.n_files += 2;

      nlohmann::json row;
      row["id"] = id;
      row["speaker"] = speaker;
      row["image"] = img_rel;
      row["spectrogram"] = spec_rel;
      manifest << row.dump() << "\n";
      ++result.n_samples;
    }
  }
  if (!manifest) throw IoError("generate_synthetic: manifest write failed");
  return result;
}

void write_all_pairs_trials(const std::vector<ManifestRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_all_pairs_trials: cannot open " + path);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j)
      out << (rows[i].speaker == rows[j].speaker ? 1 : 0) << " " << rows[i].id << " " << rows[j].id
          << "\n";
  if (!out) throw IoError("write_all_pairs_trials: write failed for " + path);
}

}  // namespace uav
