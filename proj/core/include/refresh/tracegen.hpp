#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "refresh/trace.hpp"

namespace refresh {

// Synthetic workload model. Per-query change probabilities come from a
// two-point mixture (static and hot queries) with a Pareto tail for the rest,
// mirroring the skew of real query corpora where most results never change
// and a handful change constantly.
struct GeneratorConfig {
  std::uint64_t seed = 0;
  std::int32_t n_queries = 100;
  std::int32_t n_revisions = 200;

  double static_fraction = 0.55;  // queries that never change
  double hot_fraction = 0.03;     // queries changing with hot_change_prob
  double hot_change_prob = 0.6;
  double tail_shape = 1.1;        // Pareto alpha for the remaining queries
  double tail_scale = 0.004;      // Pareto minimum change probability

  std::int64_t min_duration_ms = 5;  // per-query base duration, log-uniform
  std::int64_t max_duration_ms = 2000;
  double duration_jitter = 0.15;  // per-execution multiplicative jitter

  int result_size = 24;           // element tokens per result
  double churn = 0.35;            // fraction of elements replaced per change
  double ordered_fraction = 0.0;  // queries with order-sensitive results

  void validate() const;  // throws std::invalid_argument
};

// Applies one "key=value" setting; keys match the field names. Used by both
// the CLI flags and the config file loader.
void apply_generator_option(GeneratorConfig& cfg, std::string_view key, std::string_view value);
// Reads a key=value file ('#' starts a comment).
GeneratorConfig load_generator_config(const std::filesystem::path& path);

// Deterministic: the same config always yields a byte-identical trace.
ChangeTrace generate_trace(const GeneratorConfig& cfg);

}  // namespace refresh
