#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hdfeat/encoders.hpp"

namespace hdfeat {
namespace {

Image noise_image(std::size_t w, std::size_t h, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(w, h, c);
  for (auto& v : img.pixels) v = u(rng);
  return img;
}

TEST(InitWeightsTest, ShapeAndDeterminism) {
  const EncoderSpec spec{"t", 28, 14, 5, 42};
  const auto a = init_weights(spec), b = init_weights(spec);
  EXPECT_EQ(a.shape(), (Shape{14 * 14 * 3 + 1, 5}));
  EXPECT_TRUE(bitwise_equal(a, b));
}

TEST(InitWeightsTest, SeedsDiffer) {
  EncoderSpec spec{"t", 16, 8, 4, 1};
  const auto a = init_weights(spec);
  spec.seed = 2;
  EXPECT_FALSE(a == init_weights(spec));
}

TEST(InitWeightsTest, SampleMomentsMatchScaledNormal) {
  // 769 x 1301 = 1000469 entries, each N(0, 1/768).
  const EncoderSpec spec{"big", 16, 16, 1301, 99};
  const auto w = init_weights(spec);
  ASSERT_GE(w.size(), 1000000u);
  const double sigma = 1.0 / std::sqrt(768.0);
  double sum = 0.0, sq = 0.0;
  for (float v : w.data()) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(w.size());
  const double mean = sum / n;
  EXPECT_LT(std::abs(mean), 3.0 * sigma / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean), sigma, 0.01 * sigma);
}

TEST(SplitMixTest, ReferenceSequence) {
  // First outputs of splitmix64 seeded with 0 (reference implementation by S. Vigna).
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xe220a8397b1dcdafull);
  EXPECT_EQ(rng.next(), 0x6e789e6aa1b965f4ull);
  EXPECT_EQ(rng.next(), 0x06c45d188009454full);
}

TEST(EncodeTest, SamGeometry) {
  const auto fm = encode(noise_image(100, 60, 3, 1), {"sam", 1024, 16, 8, 3});
  EXPECT_EQ(fm.grid_h(), 64u);
  EXPECT_EQ(fm.grid_w(), 64u);
  EXPECT_EQ(fm.channels(), 8u);
}

TEST(EncodeTest, Patch14At448GivesTokenCap) {
  const auto fm = encode(noise_image(50, 50, 3, 2), {"siglip", 448, 14, 8, 1});
  EXPECT_EQ(fm.tensor().shape(), (Shape{32, 32, 8}));
  EXPECT_EQ(fm.tokens(), 1024u);
}

TEST(EncodeTest, ZeroImageYieldsBias) {
  const EncoderSpec spec{"z", 8, 4, 3, 0};
  Tensor w({spec.patch_len() + 1, 3});
  const std::vector<float> bias = {0.25f, -1.5f, 3.0f};
  for (std::size_t j = 0; j < 3; ++j) w.at(spec.patch_len(), j) = bias[j];
  const auto fm = embed_patches(Image(8, 8, 3), spec, w);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(fm.at(i, j, c), bias[c]);
}

TEST(EncodeTest, PatchFlatteningOrder) {
  // Weight row r selects input element r, so the output exposes the flattened patch.
  const EncoderSpec spec{"id", 4, 2, 12, 0};
  Tensor w({13, 12});
  for (std::size_t r = 0; r < 12; ++r) w.at(r, r) = 1.0f;
  Image img(4, 4, 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i) / 64.0f;
  const auto fm = embed_patches(img, spec, w);
  // Patch (0,1) covers x in [2,4), y in [0,2): pixels (2,0),(3,0),(2,1),(3,1).
  std::vector<float> expected;
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 2; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) expected.push_back(img.at(x, y, c));
  const auto got = fm.vec(0, 1);
  EXPECT_EQ(std::vector<float>(got.begin(), got.end()), expected);
}

TEST(EncodeTest, Deterministic) {
  const EncoderSpec spec{"d", 64, 8, 6, 5};
  const auto img = noise_image(37, 51, 3, 3);
  EXPECT_TRUE(bitwise_equal(encode(img, spec), encode(img, spec)));
}

TEST(EncodeTest, SpatialLocality) {
  const EncoderSpec spec{"loc", 32, 8, 4, 6};
  const Encoder enc(spec);
  const auto img = noise_image(32, 32, 3, 4);
  const auto base = enc(img);
  std::mt19937_64 rng(5);
  for (int it = 0; it < 10; ++it) {
    std::uniform_int_distribution<std::size_t> cell(0, 3);
    const std::size_t pi = cell(rng), pj = cell(rng);
    Image changed = img;
    for (std::size_t y = pi * 8; y < pi * 8 + 8; ++y)
      for (std::size_t x = pj * 8; x < pj * 8 + 8; ++x) changed.at(x, y, 1) = 1.0f - changed.at(x, y, 1);
    const auto out = enc(changed);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        const auto a = base.vec(i, j), b = out.vec(i, j);
        const bool same = std::equal(a.begin(), a.end(), b.begin());
        EXPECT_EQ(same, !(i == pi && j == pj)) << i << "," << j;
      }
  }
}

TEST(EncodeTest, GridIndependentOfSourceSize) {
  const EncoderSpec spec{"g", 56, 14, 2, 1};
  for (auto [w, h] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 200}, {56, 56}, {300, 100}}) {
    EXPECT_EQ(encode(noise_image(w, h, 1, 6), spec).tensor().shape(), (Shape{4, 4, 2}));
  }
}

TEST(EncodeTest, GrayscaleIsReplicated) {
  const EncoderSpec spec{"gray", 16, 4, 3, 9};
  const auto gray = noise_image(16, 16, 1, 7);
  Image rgb(16, 16, 3);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i)
    rgb.pixels[3 * i] = rgb.pixels[3 * i + 1] = rgb.pixels[3 * i + 2] = gray.pixels[i];
  EXPECT_TRUE(bitwise_equal(encode(gray, spec), encode(rgb, spec)));
}

TEST(EncodeTest, InvalidSpecIsGeometryError) {
  try {
    Encoder({"bad", 448, 15, 8, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kGeometry);
  }
  EXPECT_THROW(Encoder({"bad", 448, 14, 0, 0}), Error);
  EXPECT_THROW(Encoder({"bad", 10, 0, 4, 0}), Error);
  EXPECT_THROW(Encoder({"bad", 8, 16, 4, 0}), Error);
}

TEST(DefaultEnsembleTest, Geometry) {
  const auto specs = default_ensemble();
  ASSERT_EQ(specs.size(), 3u);
  EXPECT_EQ(specs[0].name, "siglip");
  EXPECT_EQ(specs[1].name, "dinov2");
  EXPECT_EQ(specs[2].name, "sam");
  EXPECT_EQ(specs[0].grid(), 32u);
  EXPECT_EQ(specs[1].grid(), 32u);
  EXPECT_EQ(specs[2].grid(), 64u);
  EXPECT_EQ(specs[2].grid() / specs[0].grid(), 2u);
  for (const auto& s : specs) {
    EXPECT_NO_THROW(validate(s));
    EXPECT_EQ(s.embed_dim, 16u);
  }
}

}  // namespace
}  // namespace hdfeat
