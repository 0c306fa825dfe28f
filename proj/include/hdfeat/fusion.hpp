#pragma once

// HD path: lossless 2x2 space-to-depth alignment of high-resolution encoder grids onto the
// common base grid, followed by channel concatenation across the ensemble.

#include <atomic>
#include <span>
#include <string>
#include <vector>

#include "hdfeat/config.hpp"
#include "hdfeat/encoders.hpp"
#include "hdfeat/error.hpp"
#include "hdfeat/testing_hooks.hpp"
#include "hdfeat/timing.hpp"

namespace hdfeat {

// Output vector (i, j) is the concatenation of the block's input vectors in row-major
// order: (bi, bj) for bi, bj in [0, block), i.e. TL, TR, BL, BR for block 2.
inline FeatureMap space_to_depth(const FeatureMap& fm, std::size_t block = 2) {
  if (block == 0 || fm.grid_h() % block != 0 || fm.grid_w() % block != 0) {
    throw Error(ErrorKind::kGeometry, "space_to_depth: grid " + std::to_string(fm.grid_h()) + "x" +
                                          std::to_string(fm.grid_w()) + " not divisible by block " +
                                          std::to_string(block));
  }
  const std::size_t oh = fm.grid_h() / block, ow = fm.grid_w() / block, c = fm.channels();
  FeatureMap out(oh, ow, c * block * block);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      float* dst = out.vec(i, j).data();
      for (std::size_t bi = 0; bi < block; ++bi) {
        for (std::size_t bj = 0; bj < block; ++bj) {
          const auto src = fm.vec(i * block + bi, j * block + bj);
          std::copy(src.begin(), src.end(), dst + (bi * block + bj) * c);
        }
      }
    }
  }
  return out;
}

inline FeatureMap depth_to_space(const FeatureMap& fm, std::size_t block = 2) {
  if (block == 0 || fm.channels() % (block * block) != 0) {
    throw Error(ErrorKind::kGeometry, "depth_to_space: channels " + std::to_string(fm.channels()) +
                                          " not divisible by block^2 = " + std::to_string(block * block));
  }
  const bool corrupt = testing::corrupt_depth_to_space_order.load(std::memory_order_relaxed);
  const std::size_t c = fm.channels() / (block * block);
  FeatureMap out(fm.grid_h() * block, fm.grid_w() * block, c);
  for (std::size_t i = 0; i < fm.grid_h(); ++i) {
    for (std::size_t j = 0; j < fm.grid_w(); ++j) {
      const float* src = fm.vec(i, j).data();
      for (std::size_t bi = 0; bi < block; ++bi) {
        for (std::size_t bj = 0; bj < block; ++bj) {
          const std::size_t slot = corrupt ? bj * block + bi : bi * block + bj;
          auto dst = out.vec(i * block + bi, j * block + bj);
          std::copy(src + slot * c, src + (slot + 1) * c, dst.begin());
        }
      }
    }
  }
  return out;
}

// Repeated 2x2 space-to-depth until the grid equals base_grid.
inline FeatureMap align_to_grid(const FeatureMap& fm, std::size_t base_grid) {
  if (fm.grid_h() != fm.grid_w()) {
    throw Error(ErrorKind::kGeometry, "align_to_grid: grid " + fm.describe() + " is not square");
  }
  const std::size_t g = fm.grid_h();
  if (base_grid == 0 || g < base_grid || g % base_grid != 0 || !is_power_of_two(g / base_grid)) {
    throw Error(ErrorKind::kGeometry, "align_to_grid: grid " + std::to_string(g) +
                                          " is not a power-of-two multiple of base grid " + std::to_string(base_grid));
  }
  FeatureMap cur = fm;
  while (cur.grid_h() != base_grid) cur = space_to_depth(cur, 2);
  return cur;
}

inline FeatureMap concat_channels(std::span<const FeatureMap> fms) {
  if (fms.empty()) throw Error(ErrorKind::kGeometry, "concat_channels: empty input list");
  const std::size_t gh = fms[0].grid_h(), gw = fms[0].grid_w();
  std::size_t total = 0;
  for (std::size_t k = 0; k < fms.size(); ++k) {
    if (fms[k].grid_h() != gh || fms[k].grid_w() != gw) {
      throw Error(ErrorKind::kGeometry, "concat_channels: entry " + std::to_string(k) + " has grid " +
                                            fms[k].describe() + ", expected " + std::to_string(gh) + "x" +
                                            std::to_string(gw));
    }
    total += fms[k].channels();
  }
  FeatureMap out(gh, gw, total);
  for (std::size_t i = 0; i < gh; ++i) {
    for (std::size_t j = 0; j < gw; ++j) {
      float* dst = out.vec(i, j).data();
      for (const auto& fm : fms) {
        const auto src = fm.vec(i, j);
        dst = std::copy(src.begin(), src.end(), dst);
      }
    }
  }
  return out;
}

inline FeatureMap concat_channels(std::initializer_list<FeatureMap> fms) {
  return concat_channels(std::span<const FeatureMap>(fms.begin(), fms.size()));
}

inline void check_token_budget(const PipelineConfig& cfg) {
  if (cfg.base_grid == 0 || cfg.base_grid > cfg.token_cap / cfg.base_grid) {
    throw Error(ErrorKind::kBudget, "base grid " + std::to_string(cfg.base_grid) + " gives " +
                                        std::to_string(cfg.base_grid * cfg.base_grid) + " tokens, cap is " +
                                        std::to_string(cfg.token_cap));
  }
}

// The ensemble of encoders bound to one configuration, with invocation counters.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
    check_token_budget(cfg_);
    if (cfg_.encoders.empty()) throw Error(ErrorKind::kGeometry, "pipeline needs at least one encoder");
    for (const auto& spec : cfg_.encoders) encoders_.emplace_back(spec);
  }

  const PipelineConfig& config() const noexcept { return cfg_; }
  const std::vector<Encoder>& encoders() const noexcept { return encoders_; }

  std::size_t images_encoded() const { return images_.load(); }
  std::size_t encoder_calls() const { return calls_.load(); }
  void reset_counters() {
    images_ = 0;
    calls_ = 0;
  }

  // encode -> align_to_grid -> concat_channels for one image.
  FeatureMap ensemble_feature(const Image& img, StageTimes* times = nullptr) const {
    std::vector<FeatureMap> aligned;
    aligned.reserve(encoders_.size());
    for (const auto& enc : encoders_) {
      FeatureMap fm;
      {
        ScopedStage s(times, "encode");
        fm = enc(img);
        ++calls_;
      }
      ScopedStage s(times, "align");
      aligned.push_back(align_to_grid(fm, cfg_.base_grid));
    }
    ++images_;
    ScopedStage s(times, "concat");
    return concat_channels(aligned);
  }

 private:
  PipelineConfig cfg_;
  std::vector<Encoder> encoders_;
  mutable std::atomic<std::size_t> images_{0};
  mutable std::atomic<std::size_t> calls_{0};
};

inline FeatureMap build_hd_feature(const Image& img, const Pipeline& pipeline, StageTimes* times = nullptr) {
  check_token_budget(pipeline.config());
  FeatureMap hd = pipeline.ensemble_feature(img, times);
  if (hd.tokens() > pipeline.config().token_cap) {
    throw Error(ErrorKind::kBudget, "HD feature has " + std::to_string(hd.tokens()) + " tokens, cap is " +
                                        std::to_string(pipeline.config().token_cap));
  }
  return hd;
}

inline FeatureMap build_hd_feature(const Image& img, const PipelineConfig& cfg) {
  return build_hd_feature(img, Pipeline(cfg));
}

}  // namespace hdfeat
