#include "refresh/tracegen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

namespace refresh {

namespace {

// Uniform draws derived from raw mt19937_64 output; the standard pins the
// engine but not the distributions, and traces must reproduce bit-for-bit.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  // modulo bias is irrelevant at these bounds
  return rng() % bound;
}

void check(bool ok, const std::string& message) {
  if (!ok) {
    throw std::invalid_argument(message);
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  check(n_queries > 0, "n_queries must be positive");
  check(n_revisions >= 0, "n_revisions must be non-negative");
  check(static_fraction >= 0 && static_fraction <= 1, "static_fraction outside [0,1]");
  check(hot_fraction >= 0 && hot_fraction <= 1, "hot_fraction outside [0,1]");
  check(static_fraction + hot_fraction <= 1, "static_fraction + hot_fraction exceeds 1");
  check(hot_change_prob >= 0 && hot_change_prob <= 1, "hot_change_prob outside [0,1]");
  check(tail_shape > 0, "tail_shape must be positive");
  check(tail_scale >= 0 && tail_scale <= 1, "tail_scale outside [0,1]");
  check(min_duration_ms >= 1, "min_duration_ms must be at least 1");
  check(max_duration_ms >= min_duration_ms, "max_duration_ms below min_duration_ms");
  check(duration_jitter >= 0, "duration_jitter must be non-negative");
  check(result_size >= 1, "result_size must be positive");
  check(churn >= 0 && churn <= 1, "churn outside [0,1]");
  check(ordered_fraction >= 0 && ordered_fraction <= 1, "ordered_fraction outside [0,1]");
}

void apply_generator_option(GeneratorConfig& cfg, std::string_view key, std::string_view value) {
  auto as_i64 = [&](std::int64_t& out) {
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    check(ec == std::errc() && p == value.data() + value.size(),
          "bad integer for " + std::string(key) + ": '" + std::string(value) + "'");
  };
  auto as_u64 = [&](std::uint64_t& out) {
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    check(ec == std::errc() && p == value.data() + value.size(),
          "bad integer for " + std::string(key) + ": '" + std::string(value) + "'");
  };
  auto as_i32 = [&](std::int32_t& out) {
    std::int64_t v = 0;
    as_i64(v);
    out = static_cast<std::int32_t>(v);
  };
  auto as_int = [&](int& out) {
    std::int64_t v = 0;
    as_i64(v);
    out = static_cast<int>(v);
  };
  auto as_double = [&](double& out) {
    std::string buf(value);
    char* end = nullptr;
    out = std::strtod(buf.c_str(), &end);
    check(!buf.empty() && end == buf.c_str() + buf.size(),
          "bad number for " + std::string(key) + ": '" + buf + "'");
  };

  if (key == "seed") as_u64(cfg.seed);
  else if (key == "n_queries" || key == "queries") as_i32(cfg.n_queries);
  else if (key == "n_revisions" || key == "revisions") as_i32(cfg.n_revisions);
  else if (key == "static_fraction") as_double(cfg.static_fraction);
  else if (key == "hot_fraction") as_double(cfg.hot_fraction);
  else if (key == "hot_change_prob") as_double(cfg.hot_change_prob);
  else if (key == "tail_shape") as_double(cfg.tail_shape);
  else if (key == "tail_scale") as_double(cfg.tail_scale);
  else if (key == "min_duration_ms") as_i64(cfg.min_duration_ms);
  else if (key == "max_duration_ms") as_i64(cfg.max_duration_ms);
  else if (key == "duration_jitter") as_double(cfg.duration_jitter);
  else if (key == "result_size") as_int(cfg.result_size);
  else if (key == "churn") as_double(cfg.churn);
  else if (key == "ordered_fraction") as_double(cfg.ordered_fraction);
  else throw std::invalid_argument("unknown generator option '" + std::string(key) + "'");
}

GeneratorConfig load_generator_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open generator config: " + path.string());
  }
  GeneratorConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (!line.empty() && is_space(line.back())) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && is_space(line[start])) ++start;
    if (start == line.size()) continue;
    auto eq = line.find('=', start);
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": expected key=value");
    }
    apply_generator_option(cfg, std::string_view(line).substr(start, eq - start),
                           std::string_view(line).substr(eq + 1));
  }
  return cfg;
}

ChangeTrace generate_trace(const GeneratorConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const std::int32_t n = cfg.n_queries;

  // per-query change probability, base duration, ordered flag
  std::vector<double> change_prob(n);
  std::vector<double> base_duration(n);
  std::vector<char> ordered(n, 0);
  const double log_min = std::log(static_cast<double>(cfg.min_duration_ms));
  const double log_max = std::log(static_cast<double>(cfg.max_duration_ms));
  for (std::int32_t q = 0; q < n; ++q) {
    double u = uniform01(rng);
    if (u < cfg.static_fraction) {
      change_prob[q] = 0.0;
    } else if (u < cfg.static_fraction + cfg.hot_fraction) {
      change_prob[q] = cfg.hot_change_prob;
    } else {
      // Pareto(x_m = tail_scale, alpha = tail_shape), clamped to [0,1]
      double v = uniform01(rng);
      double p = cfg.tail_scale * std::pow(1.0 - v, -1.0 / cfg.tail_shape);
      change_prob[q] = std::min(1.0, p);
    }
    base_duration[q] = std::exp(log_min + uniform01(rng) * (log_max - log_min));
    ordered[q] = uniform01(rng) < cfg.ordered_fraction ? 1 : 0;
  }

  ChangeTrace trace(n, cfg.n_revisions);
  std::uint64_t token_counter = 0;
  auto fresh_token = [&] { return "e" + std::to_string(token_counter++); };

  auto draw_duration = [&](std::int32_t q) {
    double factor = 1.0;
    if (cfg.duration_jitter > 0) {
      factor = std::exp((uniform01(rng) * 2.0 - 1.0) * cfg.duration_jitter);
    }
    double d = base_duration[q] * factor;
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(d)));
  };

  // current elements per query
  std::vector<std::vector<std::string>> elements(n);
  std::vector<std::int32_t> current_result(n);
  for (std::int32_t q = 0; q < n; ++q) {
    elements[q].reserve(cfg.result_size);
    for (int k = 0; k < cfg.result_size; ++k) {
      elements[q].push_back(fresh_token());
    }
    ResultSnapshot snap = ordered[q] ? ResultSnapshot::from_sequence(elements[q])
                                     : ResultSnapshot::from_set(elements[q]);
    current_result[q] = trace.intern_result(std::move(snap));
    trace.set_record(q, 0, draw_duration(q), current_result[q]);
  }

  const int replaced_per_change =
      std::max(1, static_cast<int>(std::ceil(cfg.churn * cfg.result_size)));
  for (std::int32_t rev = 1; rev <= cfg.n_revisions; ++rev) {
    for (std::int32_t q = 0; q < n; ++q) {
      bool change = change_prob[q] > 0 && uniform01(rng) < change_prob[q];
      if (change) {
        // replace a churn-sized subset with fresh tokens (partial Fisher-Yates)
        std::vector<int> idx(elements[q].size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<int>(k);
        for (int k = 0; k < replaced_per_change; ++k) {
          std::size_t j = k + static_cast<std::size_t>(uniform_below(rng, idx.size() - k));
          std::swap(idx[k], idx[j]);
          elements[q][idx[k]] = fresh_token();
        }
        ResultSnapshot snap = ordered[q] ? ResultSnapshot::from_sequence(elements[q])
                                         : ResultSnapshot::from_set(elements[q]);
        current_result[q] = trace.intern_result(std::move(snap));
      }
      trace.set_record(q, rev, draw_duration(q), current_result[q]);
    }
  }
  return trace;
}

}  // namespace refresh
