#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hdfeat/encoders.hpp"
#include "hdfeat/error.hpp"

namespace hdfeat {

enum class Mode { kHd, kUhd };

inline std::string_view mode_name(Mode m) { return m == Mode::kHd ? "hd" : "uhd"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "hd" || s == "HD") return Mode::kHd;
  if (s == "uhd" || s == "UHD") return Mode::kUhd;
  throw Error(ErrorKind::kConfig, "unknown mode '" + std::string(s) + "' (want hd or uhd)");
}

struct PipelineConfig {
  Mode mode = Mode::kHd;
  std::vector<EncoderSpec> encoders = default_ensemble();  // concatenation order
  std::size_t base_grid = 32;
  std::size_t token_cap = 1024;
  std::size_t llm_dim = 64;
  std::size_t hidden_dim = 0;  // 0 selects 2 x fused width
  std::uint64_t seed = 0;      // projection parameter seed

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

inline constexpr std::size_t kEnsembleSize = 3;

inline bool is_power_of_two(std::size_t v) { return v != 0 && std::has_single_bit(v); }

// Channels of one HD feature: each branch contributes embed_dim * (grid / base)^2.
inline std::size_t hd_channels(const PipelineConfig& cfg) {
  std::size_t c = 0;
  for (const auto& e : cfg.encoders) {
    const std::size_t ratio = e.grid() / cfg.base_grid;
    c += e.embed_dim * ratio * ratio;
  }
  return c;
}

inline std::size_t fused_channels(const PipelineConfig& cfg, Mode mode) {
  return mode == Mode::kHd ? hd_channels(cfg) : 2 * hd_channels(cfg);
}

inline std::size_t hidden_width(const PipelineConfig& cfg, Mode mode) {
  return cfg.hidden_dim ? cfg.hidden_dim : 2 * fused_channels(cfg, mode);
}

namespace config_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::kConfig, path + ": " + what);
}

inline std::uint64_t get_uint(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number_unsigned()) fail(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

inline void check_keys(const nlohmann::json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(path + "." + key, "unknown key");
  }
}

}  // namespace config_detail

// Throws kConfig naming the offending JSON path.
inline void validate(const PipelineConfig& cfg) {
  using config_detail::fail;
  if (cfg.encoders.size() != kEnsembleSize) {
    fail("$.encoders", "expected exactly " + std::to_string(kEnsembleSize) + " encoders, got " +
                           std::to_string(cfg.encoders.size()));
  }
  if (cfg.base_grid == 0) fail("$.base_grid", "must be >= 1");
  if (cfg.llm_dim == 0) fail("$.llm_dim", "must be >= 1");
  if (cfg.base_grid > cfg.token_cap / cfg.base_grid) {
    fail("$.base_grid", "base_grid^2 = " + std::to_string(cfg.base_grid * cfg.base_grid) +
                            " exceeds token_cap " + std::to_string(cfg.token_cap));
  }
  for (std::size_t i = 0; i < cfg.encoders.size(); ++i) {
    const auto& e = cfg.encoders[i];
    const std::string path = "$.encoders[" + std::to_string(i) + "]";
    if (e.name.empty()) fail(path + ".name", "must be non-empty");
    if (e.patch_size == 0) fail(path + ".patch_size", "must be >= 1");
    if (e.input_resolution % e.patch_size != 0) {
      fail(path + ".patch_size", "input_resolution " + std::to_string(e.input_resolution) +
                                     " is not a multiple of patch_size " + std::to_string(e.patch_size));
    }
    if (e.grid() == 0) fail(path + ".input_resolution", "grid must be >= 1");
    if (e.embed_dim == 0) fail(path + ".embed_dim", "must be >= 1");
    if (e.grid() < cfg.base_grid || e.grid() % cfg.base_grid != 0 || !is_power_of_two(e.grid() / cfg.base_grid)) {
      fail(path, "grid " + std::to_string(e.grid()) + " is not a power-of-two multiple of base_grid " +
                     std::to_string(cfg.base_grid));
    }
  }
}

inline nlohmann::json to_json(const EncoderSpec& e) {
  return {{"name", e.name},
          {"input_resolution", e.input_resolution},
          {"patch_size", e.patch_size},
          {"embed_dim", e.embed_dim},
          {"seed", e.seed}};
}

inline nlohmann::json to_json(const PipelineConfig& cfg) {
  nlohmann::json enc = nlohmann::json::array();
  for (const auto& e : cfg.encoders) enc.push_back(to_json(e));
  return {{"mode", mode_name(cfg.mode)}, {"encoders", enc},        {"base_grid", cfg.base_grid},
          {"token_cap", cfg.token_cap},  {"llm_dim", cfg.llm_dim}, {"hidden_dim", cfg.hidden_dim},
          {"seed", cfg.seed}};
}

// Absent keys take defaults; unknown keys are rejected.
inline PipelineConfig parse_config(std::string_view text) {
  using config_detail::fail;
  using config_detail::get_uint;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail("$", std::string("malformed JSON: ") + e.what());
  }
  config_detail::check_keys(j, "$", {"mode", "encoders", "base_grid", "token_cap", "llm_dim", "hidden_dim", "seed"});

  PipelineConfig cfg;
  if (j.contains("mode")) {
    if (!j["mode"].is_string()) fail("$.mode", "expected a string");
    try {
      cfg.mode = parse_mode(j["mode"].get<std::string>());
    } catch (const Error& e) {
      fail("$.mode", e.what());
    }
  }
  if (j.contains("encoders")) {
    const auto& arr = j["encoders"];
    if (!arr.is_array()) fail("$.encoders", "expected an array");
    cfg.encoders.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "$.encoders[" + std::to_string(i) + "]";
      const auto& ej = arr[i];
      config_detail::check_keys(ej, path, {"name", "input_resolution", "patch_size", "embed_dim", "seed"});
      EncoderSpec e;
      for (const char* key : {"name", "input_resolution", "patch_size", "embed_dim"}) {
        if (!ej.contains(key)) fail(path + "." + key, "missing required key");
      }
      if (!ej["name"].is_string()) fail(path + ".name", "expected a string");
      e.name = ej["name"].get<std::string>();
      e.input_resolution = get_uint(ej["input_resolution"], path + ".input_resolution");
      e.patch_size = get_uint(ej["patch_size"], path + ".patch_size");
      e.embed_dim = get_uint(ej["embed_dim"], path + ".embed_dim");
      e.seed = ej.contains("seed") ? get_uint(ej["seed"], path + ".seed") : i + 1;
      cfg.encoders.push_back(std::move(e));
    }
  }
  if (j.contains("base_grid")) cfg.base_grid = get_uint(j["base_grid"], "$.base_grid");
  if (j.contains("token_cap")) cfg.token_cap = get_uint(j["token_cap"], "$.token_cap");
  if (j.contains("llm_dim")) cfg.llm_dim = get_uint(j["llm_dim"], "$.llm_dim");
  if (j.contains("hidden_dim")) cfg.hidden_dim = get_uint(j["hidden_dim"], "$.hidden_dim");
  if (j.contains("seed")) cfg.seed = get_uint(j["seed"], "$.seed");
  validate(cfg);
  return cfg;
}

// FNV-1a over the canonical (sorted-key, compact) JSON form.
inline std::string config_digest(const PipelineConfig& cfg) {
  const std::string canon = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hdfeat
