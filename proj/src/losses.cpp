#include "uav/losses.hpp"

namespace uav {

ContrastiveDirection direction_from_string(const std::string& s) {
  if (s == "a2v") return ContrastiveDirection::a2v;
  if (s == "symmetric") return ContrastiveDirection::symmetric;
  throw ConfigError("loss.direction: unknown value '" + s + "'");
}

ReconTarget recon_target_from_string(const std::string& s) {
  if (s == "masked_only") return ReconTarget::masked_only;
  if (s == "all_tokens") return ReconTarget::all_tokens;
  throw ConfigError("loss.recon_target: unknown value '" + s + "'");
}

const char* direction_name(ContrastiveDirection d) {
  return d == ContrastiveDirection::a2v ? "a2v" : "symmetric";
}

const char* recon_target_name(ReconTarget t) {
  return t == ReconTarget::masked_only ? "masked_only" : "all_tokens";
}

}  // namespace uav
