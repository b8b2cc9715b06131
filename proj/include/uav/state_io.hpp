#pragma once

#include <unordered_map>

#include "uav/checkpoint.hpp"
#include "uav/errors.hpp"
#include "uav/model.hpp"

namespace uav {

// Parameter payloads in registry order, cast to the f32 wire type.
template <class S>
std::vector<CheckpointEntry> entries_from_state(const ModelState<S>& st) {
  std::vector<CheckpointEntry> out;
  out.reserve(st.registry.size());
  for (const ParamRef<S>& p : st.registry) {
    CheckpointEntry e;
    e.name = p.name;
    e.shape = p.tensor.shape;
    e.discardable = p.discardable;
    e.values.resize(p.tensor.numel());
    for (std::size_t i = 0; i < e.values.size(); ++i)
      e.values[i] = static_cast<float>(p.tensor.at(i));
    out.push_back(std::move(e));
  }
  return out;
}

// Copies checkpoint values into an already-built state. Full checkpoints must
// cover every parameter; inference checkpoints only the non-discardable ones.
template <class S>
void load_state_values(ModelState<S>& st, const CheckpointData& data) {
  std::unordered_map<std::string, const CheckpointEntry*> by_name;
  for (const CheckpointEntry& e : data.entries) by_name[e.name] = &e;
  const bool inference = data.kind == "inference";
  for (ParamRef<S>& p : st.registry) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      if (inference && p.discardable) continue;
      throw FormatError("load_state_values: checkpoint is missing parameter " + p.name);
    }
    const CheckpointEntry& e = *it->second;
    if (e.shape != p.tensor.shape)
      throw DimensionError("load_state_values: shape mismatch for " + p.name);
    for (std::size_t i = 0; i < e.values.size(); ++i)
      p.tensor.at(i) = static_cast<S>(e.values[i]);
    by_name.erase(it);
  }
  if (!by_name.empty())
    throw FormatError("load_state_values: checkpoint has unknown parameter " +
                      by_name.begin()->first);
}

}  // namespace uav
