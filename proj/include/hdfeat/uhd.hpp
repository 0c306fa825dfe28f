#pragma once

// UHD path: encode the four image quadrants through the full ensemble, stitch them into a
// 2G x 2G map, average-pool back to G x G and append the global HD feature along channels.
// The token count stays at base_grid^2; only the channel width doubles.

#include <array>
#include <string>

#include "hdfeat/config.hpp"
#include "hdfeat/fusion.hpp"
#include "hdfeat/imageio.hpp"
#include "hdfeat/timing.hpp"

namespace hdfeat {

// Places TL, TR, BL, BR into the four G x G corners of a 2G x 2G map.
inline FeatureMap merge_quadrant_features(std::span<const FeatureMap, 4> fms) {
  const std::size_t g = fms[0].grid_h(), c = fms[0].channels();
  for (std::size_t k = 0; k < 4; ++k) {
    if (fms[k].grid_h() != g || fms[k].grid_w() != g || fms[k].channels() != c) {
      throw Error(ErrorKind::kGeometry, "merge_quadrant_features: entry " + std::to_string(k) + " is " +
                                            fms[k].describe() + ", expected square " + fms[0].describe());
    }
  }
  FeatureMap out(2 * g, 2 * g, c);
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t oi = (k / 2) * g, oj = (k % 2) * g;
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t j = 0; j < g; ++j) {
        const auto src = fms[k].vec(i, j);
        std::copy(src.begin(), src.end(), out.vec(oi + i, oj + j).begin());
      }
    }
  }
  return out;
}

inline FeatureMap merge_quadrant_features(const std::array<FeatureMap, 4>& fms) {
  return merge_quadrant_features(std::span<const FeatureMap, 4>(fms));
}

// Non-overlapping mean pooling; sums run in double over the window in row-major order.
inline FeatureMap avgpool2d(const FeatureMap& fm, std::size_t kernel = 2, std::size_t stride = 2) {
  if (kernel != stride || kernel == 0) {
    throw Error(ErrorKind::kGeometry, "avgpool2d: only non-overlapping pooling (kernel == stride) is supported, got kernel " +
                                          std::to_string(kernel) + " stride " + std::to_string(stride));
  }
  if (fm.grid_h() % stride != 0 || fm.grid_w() % stride != 0) {
    throw Error(ErrorKind::kGeometry, "avgpool2d: grid " + fm.describe() + " not divisible by stride " +
                                          std::to_string(stride));
  }
  const std::size_t oh = fm.grid_h() / stride, ow = fm.grid_w() / stride, c = fm.channels();
  const double inv = 1.0 / static_cast<double>(kernel * kernel);
  FeatureMap out(oh, ow, c);
  std::vector<double> acc(c);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t di = 0; di < kernel; ++di)
        for (std::size_t dj = 0; dj < kernel; ++dj) {
          const auto src = fm.vec(i * stride + di, j * stride + dj);
          for (std::size_t k = 0; k < c; ++k) acc[k] += src[k];
        }
      auto dst = out.vec(i, j);
      for (std::size_t k = 0; k < c; ++k) dst[k] = static_cast<float>(acc[k] * inv);
    }
  }
  return out;
}

inline FeatureMap build_uhd_feature(const Image& img, const Pipeline& pipeline, StageTimes* times = nullptr) {
  FeatureMap hd = build_hd_feature(img, pipeline, times);
  std::array<Image, 4> tiles;
  {
    ScopedStage s(times, "split");
    tiles = split_quadrants(img);
  }
  std::array<FeatureMap, 4> tile_features;
  for (std::size_t k = 0; k < 4; ++k) tile_features[k] = pipeline.ensemble_feature(tiles[k], times);
  FeatureMap merged;
  {
    ScopedStage s(times, "merge");
    merged = merge_quadrant_features(tile_features);
  }
  FeatureMap pooled;
  {
    ScopedStage s(times, "pool");
    pooled = avgpool2d(merged, 2, 2);
  }
  ScopedStage s(times, "concat");
  FeatureMap uhd = concat_channels({pooled, hd});
  if (uhd.tokens() > pipeline.config().token_cap) {
    throw Error(ErrorKind::kBudget, "UHD feature has " + std::to_string(uhd.tokens()) + " tokens, cap is " +
                                        std::to_string(pipeline.config().token_cap));
  }
  return uhd;
}

inline FeatureMap build_uhd_feature(const Image& img, const PipelineConfig& cfg) {
  return build_uhd_feature(img, Pipeline(cfg));
}

inline FeatureMap build_feature(const Image& img, const Pipeline& pipeline, Mode mode, StageTimes* times = nullptr) {
  return mode == Mode::kHd ? build_hd_feature(img, pipeline, times) : build_uhd_feature(img, pipeline, times);
}

struct Invocations {
  std::size_t images_encoded = 0;
  std::size_t encoder_calls = 0;
  std::size_t global_passes = 0;  // whole-image ensemble passes
  std::size_t tile_passes = 0;    // quadrant ensemble passes

  friend bool operator==(const Invocations&, const Invocations&) = default;
};

// Expected encoder work per image: HD is one global pass, UHD adds four quadrant passes.
inline Invocations count_invocations(Mode mode, std::size_t encoders = kEnsembleSize) {
  Invocations inv;
  inv.global_passes = 1;
  inv.tile_passes = mode == Mode::kUhd ? 4 : 0;
  inv.images_encoded = inv.global_passes + inv.tile_passes;
  inv.encoder_calls = inv.images_encoded * encoders;
  return inv;
}

struct RunReport {
  Mode mode = Mode::kHd;
  std::size_t token_count = 0;
  std::size_t channels = 0;
  std::size_t images_encoded = 0;
  std::size_t encoder_calls = 0;
  std::size_t global_passes = 0;
  std::size_t tile_passes = 0;
  StageTimes stage_timings;
  std::string config_digest;
  std::vector<std::string> encoder_order;
  std::string concat_order;  // UHD channel layout
  std::vector<std::size_t> output_shape;
  bool projected = false;
};

}  // namespace hdfeat
