#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace uav {

struct CheckpointEntry {
  std::string name;
  std::vector<int> shape;
  bool discardable = false;
  std::vector<float> values;
};

// Checkpoint contents. `entries` are model parameters; `opt_entries` carry
// optimizer state and are dropped together with discardable parameters when
// exporting for inference.
struct CheckpointData {
  int version = 1;
  std::string kind = "full";  // "full" or "inference"
  std::int64_t step = 0;
  nlohmann::json config;      // effective experiment config echo
  std::vector<CheckpointEntry> entries;
  std::vector<CheckpointEntry> opt_entries;
};

// On-disk layout: u32 little-endian header length, JSON header, then all
// tensor payloads as little-endian f32 in manifest order. The header stores
// name/shape/offset per tensor; offsets are bytes from payload start.
// Serialization is deterministic, so save(load(f)) reproduces f byte-for-byte.
void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

// Keeps only parameters needed at inference: the joint encoder/decoder stack
// and optimizer state are dropped.
CheckpointData strip_for_inference(const CheckpointData& data);

}  // namespace uav
