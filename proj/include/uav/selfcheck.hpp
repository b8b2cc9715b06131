#pragma once

#include <cstdint>

#include <json.hpp>

namespace uav {

// Built-in invariant suites behind the `selfcheck` CLI command: gradient
// checks at both precisions on a toy config, masking-ratio statistics, and
// metric computation against the brute-force oracle. Each section reports
// pass/fail plus the measured quantities.
nlohmann::json selfcheck_gradients(std::uint64_t seed, int coords_per_param);
nlohmann::json selfcheck_masking(std::uint64_t seed, int iterations);
nlohmann::json selfcheck_metric_oracles(std::uint64_t seed, int n_sets, int set_size);
nlohmann::json run_selfcheck(std::uint64_t seed);

}  // namespace uav
