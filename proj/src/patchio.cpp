#include "uav/patchio.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "uav/errors.hpp"

namespace uav {

namespace {

constexpr char kMagic[4] = {'U', 'A', 'V', 'T'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

static_assert(std::endian::native == std::endian::little,
              "UAVT IO assumes a little-endian host");

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

}  // namespace

void save_uavt(const std::string& path, const UavtFile& file) {
  std::size_t count = 1;
  for (std::uint32_t d : file.dims) count *= d;
  if (count != file.data.size())
    throw DimensionError("save_uavt: dims do not match payload length");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_uavt: cannot open " + path);
  out.write(kMagic, 4);
  const std::uint8_t head[4] = {kVersion, kDtypeF32, static_cast<std::uint8_t>(file.dims.size()), 0};
  out.write(reinterpret_cast<const char*>(head), 4);
  for (std::uint32_t d : file.dims) write_u32(out, d);
  out.write(reinterpret_cast<const char*>(file.data.data()),
            static_cast<std::streamsize>(file.data.size() * sizeof(float)));
  if (!out) throw IoError("save_uavt: write failed for " + path);
}

UavtFile load_uavt(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_uavt: cannot open " + path);
  char magic[4];
  std::uint8_t head[4];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(head), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("load_uavt: bad magic in " + path);
  if (head[0] != kVersion)
    throw FormatError("load_uavt: unsupported version " + std::to_string(head[0]));
  if (head[1] != kDtypeF32)
    throw FormatError("load_uavt: unsupported dtype " + std::to_string(head[1]));
  const int ndim = head[2];
  if (ndim < 1 || ndim > 8) throw FormatError("load_uavt: implausible ndim " + std::to_string(ndim));
  UavtFile file;
  file.dims.resize(static_cast<std::size_t>(ndim));
  in.read(reinterpret_cast<char*>(file.dims.data()), static_cast<std::streamsize>(4 * ndim));
  if (!in) throw CorruptionError("load_uavt: truncated header in " + path);
  std::size_t count = 1;
  for (std::uint32_t d : file.dims) count *= d;
  file.data.resize(count);
  in.read(reinterpret_cast<char*>(file.data.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
    throw CorruptionError("load_uavt: payload shorter than header dims in " + path);
  // trailing bytes mean the header lied about the shape
  char extra;
  if (in.read(&extra, 1))
    throw CorruptionError("load_uavt: payload longer than header dims in " + path);
  return file;
}

RawInput load_tensor(const std::string& path, Modality modality) {
  UavtFile f = load_uavt(path);
  if (f.dims.size() != 3)
    throw FormatError("load_tensor: expected 3 dims (H, W, C), got " +
                      std::to_string(f.dims.size()) + " in " + path);
  RawInput r;
  r.modality = modality;
  r.height = static_cast<int>(f.dims[0]);
  r.width = static_cast<int>(f.dims[1]);
  r.channels = static_cast<int>(f.dims[2]);
  r.data = std::move(f.data);
  return r;
}

void save_tensor(const std::string& path, const RawInput& input) {
  UavtFile f;
  f.dims = {static_cast<std::uint32_t>(input.height), static_cast<std::uint32_t>(input.width),
            static_cast<std::uint32_t>(input.channels)};
  f.data = input.data;
  save_uavt(path, f);
}

std::vector<float> load_vector(const std::string& path) {
  UavtFile f = load_uavt(path);
  if (f.dims.size() != 1)
    throw FormatError("load_vector: expected 1 dim, got " + std::to_string(f.dims.size()) +
                      " in " + path);
  return std::move(f.data);
}

void save_vector(const std::string& path, const std::vector<float>& values) {
  UavtFile f;
  f.dims = {static_cast<std::uint32_t>(values.size())};
  f.data = values;
  save_uavt(path, f);
}

RawInput inflate_channels(const RawInput& x) {
  if (x.channels != 1)
    throw PreconditionError("inflate_channels: input must have exactly 1 channel, got " +
                            std::to_string(x.channels));
  RawInput out;
  out.modality = x.modality;
  out.height = x.height;
  out.width = x.width;
  out.channels = 3;
  out.data.resize(x.data.size() * 3);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    out.data[3 * i + 0] = x.data[i];
    out.data[3 * i + 1] = x.data[i];
    out.data[3 * i + 2] = x.data[i];
  }
  return out;
}

TokenSequence patchify(const RawInput& x, int patch_size) {
  if (x.channels != 3)
    throw PreconditionError("patchify: input must have 3 channels (inflate audio first)");
  if (patch_size < 1) throw GeometryError("patchify: patch size must be positive");
  if (x.height % patch_size != 0 || x.width % patch_size != 0)
    throw GeometryError("patchify: dims " + std::to_string(x.height) + "x" +
                        std::to_string(x.width) + " not divisible by patch size " +
                        std::to_string(patch_size));
  TokenSequence t;
  t.modality = x.modality;
  t.patch_size = patch_size;
  t.grid_rows = x.height / patch_size;
  t.grid_cols = x.width / patch_size;
  t.token_dim = patch_size * patch_size * 3;
  const int count = t.grid_rows * t.grid_cols;
  t.tokens.resize(static_cast<std::size_t>(count) * t.token_dim);
  t.source_index.resize(static_cast<std::size_t>(count));
  for (int gr = 0; gr < t.grid_rows; ++gr) {
    for (int gc = 0; gc < t.grid_cols; ++gc) {
      const int tok = gr * t.grid_cols + gc;
      t.source_index[static_cast<std::size_t>(tok)] = tok;
      float* dst = t.tokens.data() + static_cast<std::size_t>(tok) * t.token_dim;
      for (int pi = 0; pi < patch_size; ++pi)
        for (int pj = 0; pj < patch_size; ++pj)
          for (int c = 0; c < 3; ++c)
            *dst++ = x.at(gr * patch_size + pi, gc * patch_size + pj, c);
    }
  }
  return t;
}

RawInput unpatchify(const TokenSequence& t) {
  const int expected = t.grid_rows * t.grid_cols;
  if (t.count() != expected)
    throw GeometryError("unpatchify: grid expects " + std::to_string(expected) + " tokens, got " +
                        std::to_string(t.count()));
  for (int i = 0; i < t.count(); ++i)
    if (t.source_index[static_cast<std::size_t>(i)] != i)
      throw GeometryError("unpatchify: sequence is not identity-ordered (masked subset?)");
  if (t.token_dim != t.patch_size * t.patch_size * 3)
    throw GeometryError("unpatchify: token width inconsistent with patch size");
  RawInput out;
  out.modality = t.modality;
  out.height = t.grid_rows * t.patch_size;
  out.width = t.grid_cols * t.patch_size;
  out.channels = 3;
  out.data.resize(static_cast<std::size_t>(out.height) * out.width * 3);
  for (int gr = 0; gr < t.grid_rows; ++gr) {
    for (int gc = 0; gc < t.grid_cols; ++gc) {
      const float* src = t.row(gr * t.grid_cols + gc);
      for (int pi = 0; pi < t.patch_size; ++pi)
        for (int pj = 0; pj < t.patch_size; ++pj)
          for (int c = 0; c < 3; ++c) {
            const int i = gr * t.patch_size + pi;
            const int j = gc * t.patch_size + pj;
            out.data[(static_cast<std::size_t>(i) * out.width + j) * 3 + c] = *src++;
          }
    }
  }
  return out;
}

std::vector<ManifestRow> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_manifest: cannot open " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  std::vector<ManifestRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object())
      throw ParseError("load_manifest: bad JSON at " + path + ":" + std::to_string(lineno));
    for (const char* key : {"id", "speaker", "image", "spectrogram"})
      if (!rec.contains(key) || !rec[key].is_string())
        throw ParseError("load_manifest: missing key '" + std::string(key) + "' at " + path + ":" +
                         std::to_string(lineno));
    ManifestRow r;
    r.id = rec["id"].get<std::string>();
    r.speaker = rec["speaker"].get<std::string>();
    r.image_path = resolve(rec["image"].get<std::string>());
    r.spectrogram_path = resolve(rec["spectrogram"].get<std::string>());
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace uav
