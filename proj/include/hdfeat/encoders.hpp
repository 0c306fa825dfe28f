#pragma once

// Deterministic stand-ins for the SigLIP / DINOv2 / SAM vision towers. Each stub is an
// affine patch embedder: it reproduces the real encoder's input resolution, patch grid
// and channel width, which is all the fusion geometry downstream depends on.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include "hdfeat/error.hpp"
#include "hdfeat/imageio.hpp"
#include "hdfeat/tensor.hpp"

namespace hdfeat {

struct EncoderSpec {
  std::string name;
  std::size_t input_resolution = 0;  // square input, pixels
  std::size_t patch_size = 0;
  std::size_t embed_dim = 0;
  std::uint64_t seed = 0;

  std::size_t grid() const { return patch_size ? input_resolution / patch_size : 0; }
  std::size_t patch_len() const { return patch_size * patch_size * 3; }

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

inline void validate(const EncoderSpec& s) {
  const std::string who = "encoder '" + s.name + "'";
  if (s.patch_size == 0) throw Error(ErrorKind::kGeometry, who + ": patch_size must be >= 1");
  if (s.input_resolution % s.patch_size != 0) {
    throw Error(ErrorKind::kGeometry, who + ": input_resolution " + std::to_string(s.input_resolution) +
                                          " is not a multiple of patch_size " + std::to_string(s.patch_size));
  }
  if (s.grid() == 0) throw Error(ErrorKind::kGeometry, who + ": grid must be >= 1");
  if (s.embed_dim == 0) throw Error(ErrorKind::kGeometry, who + ": embed_dim must be >= 1");
}

// One vector per patch: data is [grid_h x grid_w x channels].
class FeatureMap {
 public:
  FeatureMap() = default;
  explicit FeatureMap(Tensor data) : data_(std::move(data)) {
    detail::require_rank(data_, 3, "FeatureMap");
  }
  FeatureMap(std::size_t gh, std::size_t gw, std::size_t c) : data_(Shape{gh, gw, c}) {}

  std::size_t grid_h() const { return data_.dim(0); }
  std::size_t grid_w() const { return data_.dim(1); }
  std::size_t channels() const { return data_.dim(2); }
  std::size_t tokens() const { return grid_h() * grid_w(); }

  const Tensor& tensor() const noexcept { return data_; }
  Tensor& tensor() noexcept { return data_; }

  float at(std::size_t i, std::size_t j, std::size_t c) const { return data_.at(i, j, c); }
  float& at(std::size_t i, std::size_t j, std::size_t c) { return data_.at(i, j, c); }

  std::span<const float> vec(std::size_t i, std::size_t j) const {
    return data_.data().subspan((i * grid_w() + j) * channels(), channels());
  }
  std::span<float> vec(std::size_t i, std::size_t j) {
    return data_.data().subspan((i * grid_w() + j) * channels(), channels());
  }

  std::string describe() const {
    return std::to_string(grid_h()) + "x" + std::to_string(grid_w()) + "x" + std::to_string(channels());
  }

  friend bool bitwise_equal(const FeatureMap& a, const FeatureMap& b) { return bitwise_equal(a.data_, b.data_); }
  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  Tensor data_;
};

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in the open interval (0, 1), 53 bits of resolution.
  double uniform_open() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Standard normals from a splitmix64 stream via Box-Muller; both outputs of each pair are used.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = rng_.uniform_open();
    const double u2 = rng_.uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  SplitMix64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// [(patch_size^2 * 3 + 1) x embed_dim]; the last row is the bias.
inline Tensor init_weights(const EncoderSpec& spec) {
  validate(spec);
  const std::size_t rows = spec.patch_len() + 1;
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.patch_len()));
  NormalStream normals(spec.seed);
  Tensor w({rows, spec.embed_dim});
  for (auto& v : w.data()) v = static_cast<float>(normals.next() * scale);
  return w;
}

using WeightHandle = std::shared_ptr<const Tensor>;

// Process-wide cache so each distinct spec is initialised once.
inline WeightHandle cached_weights(const EncoderSpec& spec) {
  using Key = std::tuple<std::size_t, std::size_t, std::size_t, std::uint64_t>;
  static std::mutex mu;
  static std::map<Key, WeightHandle> cache;
  const Key key{spec.input_resolution, spec.patch_size, spec.embed_dim, spec.seed};
  std::lock_guard lock(mu);
  auto& slot = cache[key];
  if (!slot) slot = std::make_shared<const Tensor>(init_weights(spec));
  return slot;
}

// Resize to the encoder resolution and replicate grayscale to RGB.
inline Image prepare_input(const Image& img, std::size_t resolution) {
  Image sized = (img.width == resolution && img.height == resolution)
                    ? img
                    : resize_bilinear(img, resolution, resolution);
  if (sized.channels == 3) return sized;
  if (sized.channels != 1) {
    throw Error(ErrorKind::kShape, "encoder input needs 1 or 3 channels, got " + std::to_string(sized.channels));
  }
  Image rgb(sized.width, sized.height, 3);
  for (std::size_t i = 0; i < sized.pixels.size(); ++i) {
    rgb.pixels[3 * i] = rgb.pixels[3 * i + 1] = rgb.pixels[3 * i + 2] = sized.pixels[i];
  }
  return rgb;
}

// Patches are visited row-major; each is flattened row-major / channel-last, with a
// trailing 1 so the bias row of the weight matrix applies.
inline FeatureMap embed_patches(const Image& rgb, const EncoderSpec& spec, const Tensor& weights) {
  const std::size_t p = spec.patch_size, g = spec.grid(), len = spec.patch_len();
  if (rgb.width != spec.input_resolution || rgb.height != spec.input_resolution || rgb.channels != 3) {
    throw Error(ErrorKind::kGeometry, "embed_patches expects a " + std::to_string(spec.input_resolution) + "x" +
                                          std::to_string(spec.input_resolution) + "x3 image");
  }
  if (weights.shape() != Shape{len + 1, spec.embed_dim}) {
    throw Error(ErrorKind::kShape, "weights " + shape_str(weights.shape()) + " do not match encoder '" +
                                       spec.name + "'");
  }
  Tensor patches({g * g, len + 1});
  auto pd = patches.data();
  for (std::size_t gi = 0; gi < g; ++gi) {
    for (std::size_t gj = 0; gj < g; ++gj) {
      float* row = pd.data() + (gi * g + gj) * (len + 1);
      for (std::size_t y = 0; y < p; ++y) {
        const float* src = &rgb.pixels[((gi * p + y) * rgb.width + gj * p) * 3];
        std::copy(src, src + p * 3, row + y * p * 3);
      }
      row[len] = 1.0f;
    }
  }
  return FeatureMap(matmul(patches, weights).reshaped({g, g, spec.embed_dim}));
}

class Encoder {
 public:
  explicit Encoder(EncoderSpec spec) : spec_(std::move(spec)), weights_((validate(spec_), cached_weights(spec_))) {}

  const EncoderSpec& spec() const noexcept { return spec_; }
  const Tensor& weights() const noexcept { return *weights_; }

  FeatureMap operator()(const Image& img) const {
    return embed_patches(prepare_input(img, spec_.input_resolution), spec_, *weights_);
  }

 private:
  EncoderSpec spec_;
  WeightHandle weights_;
};

inline FeatureMap encode(const Image& img, const EncoderSpec& spec) { return Encoder(spec)(img); }

inline constexpr std::size_t kDefaultEmbedDim = 16;

// SigLIP and DINOv2 at 448 px / patch 14 (32x32 grid), SAM at 1024 px / patch 16 (64x64 grid).
inline std::vector<EncoderSpec> default_ensemble(std::size_t dim_siglip = kDefaultEmbedDim,
                                                 std::size_t dim_dinov2 = kDefaultEmbedDim,
                                                 std::size_t dim_sam = kDefaultEmbedDim) {
  return {
      {"siglip", 448, 14, dim_siglip, 1},
      {"dinov2", 448, 14, dim_dinov2, 2},
      {"sam", 1024, 16, dim_sam, 3},
  };
}

}  // namespace hdfeat
