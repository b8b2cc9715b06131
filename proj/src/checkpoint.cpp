#include "uav/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "uav/errors.hpp"

namespace uav {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

nlohmann::json manifest_of(const std::vector<CheckpointEntry>& entries, std::uint64_t& offset) {
  nlohmann::json arr = nlohmann::json::array();
  for (const CheckpointEntry& e : entries) {
    nlohmann::json item;
    item["name"] = e.name;
    item["shape"] = e.shape;
    item["offset"] = offset;
    item["discardable"] = e.discardable;
    arr.push_back(std::move(item));
    offset += e.values.size() * sizeof(float);
  }
  return arr;
}

std::vector<CheckpointEntry> entries_from_manifest(const nlohmann::json& arr, const char* what) {
  if (!arr.is_array()) throw FormatError(std::string("checkpoint: ") + what + " must be an array");
  std::vector<CheckpointEntry> out;
  for (const nlohmann::json& item : arr) {
    CheckpointEntry e;
    e.name = item.at("name").get<std::string>();
    e.shape = item.at("shape").get<std::vector<int>>();
    e.discardable = item.at("discardable").get<bool>();
    std::size_t count = 1;
    for (int d : e.shape) {
      if (d < 0) throw CorruptionError("checkpoint: negative dim for " + e.name);
      count *= static_cast<std::size_t>(d);
    }
    e.values.resize(count);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  nlohmann::json header;
  header["version"] = data.version;
  header["kind"] = data.kind;
  header["step"] = data.step;
  header["config"] = data.config;
  std::uint64_t offset = 0;
  header["params"] = manifest_of(data.entries, offset);
  header["opt_params"] = manifest_of(data.opt_entries, offset);
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_checkpoint: cannot open " + path);
  const std::uint32_t head_len = static_cast<std::uint32_t>(head.size());
  out.write(reinterpret_cast<const char*>(&head_len), 4);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  auto write_all = [&](const std::vector<CheckpointEntry>& entries) {
    for (const CheckpointEntry& e : entries)
      out.write(reinterpret_cast<const char*>(e.values.data()),
                static_cast<std::streamsize>(e.values.size() * sizeof(float)));
  };
  write_all(data.entries);
  write_all(data.opt_entries);
  if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  std::uint32_t head_len = 0;
  in.read(reinterpret_cast<char*>(&head_len), 4);
  if (!in) throw FormatError("load_checkpoint: missing header in " + path);
  std::string head(head_len, '\0');
  in.read(head.data(), head_len);
  if (!in) throw CorruptionError("load_checkpoint: truncated header in " + path);
  nlohmann::json header = nlohmann::json::parse(head, nullptr, false);
  if (header.is_discarded()) throw FormatError("load_checkpoint: header is not valid JSON in " + path);

  CheckpointData data;
  data.version = header.at("version").get<int>();
  if (data.version != 1)
    throw FormatError("load_checkpoint: unsupported version " + std::to_string(data.version));
  data.kind = header.at("kind").get<std::string>();
  data.step = header.at("step").get<std::int64_t>();
  data.config = header.at("config");
  data.entries = entries_from_manifest(header.at("params"), "params");
  data.opt_entries = entries_from_manifest(header.at("opt_params"), "opt_params");

  auto read_all = [&](std::vector<CheckpointEntry>& entries) {
    for (CheckpointEntry& e : entries) {
      in.read(reinterpret_cast<char*>(e.values.data()),
              static_cast<std::streamsize>(e.values.size() * sizeof(float)));
      if (static_cast<std::size_t>(in.gcount()) != e.values.size() * sizeof(float))
        throw CorruptionError("load_checkpoint: truncated payload at " + e.name + " in " + path);
    }
  };
  read_all(data.entries);
  read_all(data.opt_entries);
  char extra;
  if (in.read(&extra, 1))
    throw CorruptionError("load_checkpoint: trailing bytes after payload in " + path);
  return data;
}

CheckpointData strip_for_inference(const CheckpointData& data) {
  CheckpointData out;
  out.version = data.version;
  out.kind = "inference";
  out.step = data.step;
  out.config = data.config;
  for (const CheckpointEntry& e : data.entries)
    if (!e.discardable) out.entries.push_back(e);
  return out;
}

}  // namespace uav
