#pragma once

#include <json.hpp>

#include "hdfeat/config.hpp"
#include "hdfeat/uhd.hpp"

namespace hdfeat {

inline nlohmann::json to_json(const RunReport& r) {
  return {
      {"mode", mode_name(r.mode)},
      {"token_count", r.token_count},
      {"channels", r.channels},
      {"images_encoded", r.images_encoded},
      {"encoder_calls", r.encoder_calls},
      {"global_passes", r.global_passes},
      {"tile_passes", r.tile_passes},
      {"stage_timings", r.stage_timings},
      {"config_digest", r.config_digest},
      {"encoder_order", r.encoder_order},
      {"concat_order", r.concat_order},
      {"output_shape", r.output_shape},
      {"projected", r.projected},
  };
}

inline RunReport make_report(const Pipeline& pipeline, Mode mode, const FeatureMap& feature) {
  const auto& cfg = pipeline.config();
  RunReport r;
  r.mode = mode;
  r.token_count = feature.tokens();
  r.channels = feature.channels();
  r.images_encoded = pipeline.images_encoded();
  r.encoder_calls = pipeline.encoder_calls();
  const auto expected = count_invocations(mode, cfg.encoders.size());
  r.global_passes = expected.global_passes;
  r.tile_passes = expected.tile_passes;
  PipelineConfig effective = cfg;
  effective.mode = mode;
  r.config_digest = config_digest(effective);
  for (const auto& e : cfg.encoders) r.encoder_order.push_back(e.name);
  r.concat_order = mode == Mode::kHd ? "hd" : "pooled_quadrants,hd";
  r.output_shape = feature.tensor().shape();
  return r;
}

}  // namespace hdfeat
