#pragma once

// Built-in invariant suites run by `hdfeat selftest`. Each suite is small enough to finish
// in well under a second.

#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "hdfeat/check.hpp"
#include "hdfeat/fusion.hpp"
#include "hdfeat/imageio.hpp"
#include "hdfeat/projection.hpp"
#include "hdfeat/uhd.hpp"

namespace hdfeat::selftest {

struct Suite {
  std::string name;
  std::function<bool()> run;
};

inline std::vector<Suite> suites() {
  return {
      {"matmul_oracle",
       [] {
         std::mt19937_64 rng(11);
         for (int it = 0; it < 50; ++it) {
           std::uniform_int_distribution<std::size_t> dim(1, 9);
           const auto m = dim(rng), k = dim(rng), n = dim(rng);
           const auto a = check::random_tensor<float>({m, k}, rng), b = check::random_tensor<float>({k, n}, rng);
           if (!bitwise_equal(matmul(a, b), check::naive_matmul(a, b))) return false;
         }
         return true;
       }},
      {"space_to_depth_bijection",
       [] {
         std::mt19937_64 rng(12);
         std::uniform_int_distribution<std::size_t> half(1, 16), ch(1, 8);
         for (int it = 0; it < 200; ++it) {
           const auto fm = check::random_feature_map(2 * half(rng), 2 * half(rng), ch(rng), rng);
           const auto s2d = space_to_depth(fm);
           if (!bitwise_equal(s2d, check::naive_space_to_depth(fm, 2))) return false;
           if (!bitwise_equal(depth_to_space(s2d), fm)) return false;
         }
         return true;
       }},
      {"avgpool_mean",
       [] {
         std::mt19937_64 rng(13);
         std::uniform_int_distribution<std::size_t> half(1, 8), ch(1, 6);
         for (int it = 0; it < 100; ++it) {
           const auto fm = check::random_feature_map(2 * half(rng), 2 * half(rng), ch(rng), rng);
           const auto pooled = avgpool2d(fm);
           const auto a = check::channel_means(fm), b = check::channel_means(pooled);
           for (std::size_t c = 0; c < a.size(); ++c)
             if (std::abs(a[c] - b[c]) > 1e-5) return false;
         }
         return true;
       }},
      {"gate_attenuation",
       [] {
         std::mt19937_64 rng(14);
         for (int it = 0; it < 200; ++it) {
           const auto p = check::random_projection<float>(6, 4, 3, rng);
           const auto x = check::random_tensor<float>({3, 6}, rng, -5.0, 5.0);
           const auto y = context_gate_forward(x, p).first;
           for (std::size_t i = 0; i < x.size(); ++i)
             if (std::abs(y[i]) > std::abs(x[i])) return false;
         }
         return true;
       }},
      {"gradient_check_f64",
       [] {
         std::mt19937_64 rng(15);
         int checked = 0;
         while (checked < 20) {
           const auto r = check::gradient_check<double>(3, 4, 6, 5, rng, 1e-3);
           if (r.skipped) continue;
           if (r.gate_error > 1e-6 || r.mlp_error > 1e-6) return false;
           ++checked;
         }
         return true;
       }},
      {"quadrant_reassembly",
       [] {
         std::mt19937_64 rng(16);
         std::uniform_int_distribution<std::size_t> side(1, 9);
         for (int it = 0; it < 20; ++it) {
           const auto w = side(rng), h = side(rng);
           Image img(w, h, 3);
           std::uniform_real_distribution<float> u(0.0f, 1.0f);
           for (auto& v : img.pixels) v = u(rng);
           if (!(join_quadrants(split_quadrants(img)) == pad_to_even(img))) return false;
         }
         return true;
       }},
      {"pnm_roundtrip",
       [] {
         Image img(5, 3, 3);
         for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i * 17 % 256) / 255.0f;
         return load_pnm(write_pnm(img)) == img;
       }},
      {"pipeline_determinism",
       [] {
         PipelineConfig cfg;
         cfg.encoders = {{"a", 32, 4, 3, 7}, {"b", 32, 8, 2, 8}, {"c", 64, 8, 2, 9}};
         cfg.base_grid = 4;
         cfg.token_cap = 16;
         Image img(21, 13, 3);
         for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i % 97) / 96.0f;
         const Pipeline pipe(cfg);
         const auto a = build_uhd_feature(img, pipe), b = build_uhd_feature(img, pipe);
         return bitwise_equal(a, b) && a.tokens() == 16 && a.channels() == 2 * hd_channels(cfg);
       }},
  };
}

// Prints one line per suite; returns true iff all pass.
inline bool run_all(std::ostream& out) {
  bool ok = true;
  for (const auto& s : suites()) {
    bool pass = false;
    try {
      pass = s.run();
    } catch (const std::exception& e) {
      out << "  exception in " << s.name << ": " << e.what() << "\n";
    }
    out << (pass ? "PASS " : "FAIL ") << s.name << "\n";
    ok = ok && pass;
  }
  return ok;
}

}  // namespace hdfeat::selftest
