#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hdfeat/error.hpp"
#include "hdfeat/hdft.hpp"
#include "hdfeat/tensor.hpp"

namespace hdfeat {

// Decoded raster, channel-last, values in [0, 1].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 or 3
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c) : width(w), height(h), channels(c), pixels(w * h * c, 0.0f) {}
  Image(std::size_t w, std::size_t h, std::size_t c, std::vector<float> px)
      : width(w), height(h), channels(c), pixels(std::move(px)) {
    if (pixels.size() != w * h * c) {
      throw Error(ErrorKind::kShape, "image pixel count " + std::to_string(pixels.size()) + " != " +
                                         std::to_string(w) + "x" + std::to_string(h) + "x" + std::to_string(c));
    }
  }

  static Image filled(std::size_t w, std::size_t h, std::size_t c, float v) {
    return Image(w, h, c, std::vector<float>(w * h * c, v));
  }

  float at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
  float& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }

  friend bool operator==(const Image&, const Image&) = default;
};

namespace pnm_detail {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  std::size_t offset() const { return pos_; }

  // Skips whitespace and '#' comments, then reads a decimal integer.
  std::size_t read_uint() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (std::size_t{1} << 31)) fail("header integer too large", start);
      ++pos_;
    }
    if (pos_ == start) fail("expected integer", start);
    return v;
  }

  // Exactly one whitespace byte separates maxval from the payload.
  void read_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("expected single whitespace before payload", pos_);
    ++pos_;
  }

  [[noreturn]] static void fail(const std::string& what, std::size_t offset) {
    throw Error(ErrorKind::kParse, "PNM " + what + " at byte offset " + std::to_string(offset));
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 2;
};

}  // namespace pnm_detail

// Binary PGM (P5) or PPM (P6) with maxval 255.
inline Image load_pnm(const std::vector<std::uint8_t>& bytes) {
  using pnm_detail::HeaderReader;
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    HeaderReader::fail("unknown magic (want P5 or P6)", 0);
  }
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader r(bytes);
  const std::size_t w_off = r.offset();
  const std::size_t width = r.read_uint();
  const std::size_t height = r.read_uint();
  if (width == 0 || height == 0) HeaderReader::fail("zero image dimension", w_off);
  const std::size_t maxval_off = r.offset();
  const std::size_t maxval = r.read_uint();
  if (maxval != 255) HeaderReader::fail("maxval " + std::to_string(maxval) + " != 255", maxval_off);
  r.read_single_space();

  const std::size_t off = r.offset();
  const std::size_t n = width * height * channels;
  if (bytes.size() - off < n) {
    HeaderReader::fail("truncated payload: need " + std::to_string(n) + " bytes, have " +
                           std::to_string(bytes.size() - off),
                       bytes.size());
  }
  std::vector<float> px(n);
  for (std::size_t i = 0; i < n; ++i) px[i] = static_cast<float>(bytes[off + i]) / 255.0f;
  return Image(width, height, channels, std::move(px));
}

inline std::vector<std::uint8_t> write_pnm(const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw Error(ErrorKind::kShape, "PNM needs 1 or 3 channels, got " + std::to_string(img.channels));
  }
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.pixels.size());
  for (float v : img.pixels) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  }
  return out;
}

inline Image load_pnm_file(const std::filesystem::path& path) { return load_pnm(hdft::read_bytes(path)); }

// Bilinear resampling with half-pixel centres: s = (d + 0.5) * in / out - 0.5, clamped to
// [0, in - 1]. Interpolation is written as a + (b - a) * t so constant regions stay exact.
inline Image resize_bilinear(const Image& img, std::size_t out_w, std::size_t out_h) {
  if (out_w == 0 || out_h == 0) throw Error(ErrorKind::kGeometry, "resize target must be at least 1x1");
  struct Tap {
    std::size_t i0, i1;
    double t;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> v(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
      double s = (static_cast<double>(d) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(s));
      v[d] = {i0, std::min(i0 + 1, in - 1), s - static_cast<double>(i0)};
    }
    return v;
  };
  const auto xs = taps(img.width, out_w);
  const auto ys = taps(img.height, out_h);
  const std::size_t c = img.channels;
  Image out(out_w, out_h, c);
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto& ty = ys[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto& tx = xs[x];
      for (std::size_t k = 0; k < c; ++k) {
        const double p00 = img.at(tx.i0, ty.i0, k), p01 = img.at(tx.i1, ty.i0, k);
        const double p10 = img.at(tx.i0, ty.i1, k), p11 = img.at(tx.i1, ty.i1, k);
        const double top = p00 + (p01 - p00) * tx.t;
        const double bot = p10 + (p11 - p10) * tx.t;
        out.at(x, y, k) = static_cast<float>(top + (bot - top) * ty.t);
      }
    }
  }
  return out;
}

// Replicates the last row/column so both dimensions are even.
inline Image pad_to_even(const Image& img) {
  const std::size_t w = img.width + img.width % 2, h = img.height + img.height % 2;
  if (w == img.width && h == img.height) return img;
  Image out(w, h, img.channels);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t sy = std::min(y, img.height - 1);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t sx = std::min(x, img.width - 1);
      for (std::size_t k = 0; k < img.channels; ++k) out.at(x, y, k) = img.at(sx, sy, k);
    }
  }
  return out;
}

enum Quadrant : std::size_t { kTopLeft = 0, kTopRight = 1, kBottomLeft = 2, kBottomRight = 3 };

inline Image crop(const Image& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  Image out(w, h, img.channels);
  const std::size_t row = w * img.channels;
  for (std::size_t y = 0; y < h; ++y) {
    const float* src = &img.pixels[((y0 + y) * img.width + x0) * img.channels];
    std::copy(src, src + row, &out.pixels[y * row]);
  }
  return out;
}

// Returns {TL, TR, BL, BR}; odd inputs are edge-padded to even size first.
inline std::array<Image, 4> split_quadrants(const Image& img) {
  const Image padded = pad_to_even(img);
  const std::size_t hw = padded.width / 2, hh = padded.height / 2;
  return {crop(padded, 0, 0, hw, hh), crop(padded, hw, 0, hw, hh), crop(padded, 0, hh, hw, hh),
          crop(padded, hw, hh, hw, hh)};
}

// Spatial inverse of split_quadrants (reconstructs the padded image).
inline Image join_quadrants(const std::array<Image, 4>& q) {
  const std::size_t hw = q[0].width, hh = q[0].height, c = q[0].channels;
  for (const auto& part : q) {
    if (part.width != hw || part.height != hh || part.channels != c) {
      throw Error(ErrorKind::kGeometry, "quadrant images differ in size");
    }
  }
  Image out(2 * hw, 2 * hh, c);
  for (std::size_t qi = 0; qi < 4; ++qi) {
    const std::size_t ox = (qi % 2) * hw, oy = (qi / 2) * hh;
    for (std::size_t y = 0; y < hh; ++y)
      for (std::size_t x = 0; x < hw; ++x)
        for (std::size_t k = 0; k < c; ++k) out.at(ox + x, oy + y, k) = q[qi].at(x, y, k);
  }
  return out;
}

inline Tensor to_tensor(const Image& img) { return Tensor({img.height, img.width, img.channels}, img.pixels); }

inline Image from_tensor(const Tensor& t) {
  detail::require_rank(t, 3, "from_tensor");
  return Image(t.dim(1), t.dim(0), t.dim(2), t.vec());
}

}  // namespace hdfeat
