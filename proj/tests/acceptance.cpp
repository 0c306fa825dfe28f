// End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL line each, and
// exits non-zero if any criterion fails.
//
// usage: acceptance <path-to-hdfeat-cli>

#include <spawn.h>
#include <sys/resource.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <fcntl.h>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hdfeat/check.hpp"
#include "hdfeat/cli.hpp"
#include "hdfeat/hdfeat.hpp"

extern char** environ;

namespace {

namespace fs = std::filesystem;
using namespace hdfeat;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct ProcessResult {
  int exit_code = -1;
  long max_rss_kib = 0;
  double seconds = 0.0;
};

// Runs the CLI as a child process, optionally redirecting stdout, and reports its peak RSS.
ProcessResult spawn(const std::string& exe, const std::vector<std::string>& args, const std::string& stdout_path = "") {
  std::vector<std::string> all = {exe};
  all.insert(all.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : all) argv.push_back(a.data());
  argv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  if (!stdout_path.empty()) {
    posix_spawn_file_actions_addopen(&actions, 1, stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  }
  ProcessResult res;
  const auto start = std::chrono::steady_clock::now();
  pid_t pid = 0;
  if (posix_spawn(&pid, exe.c_str(), &actions, nullptr, argv.data(), environ) != 0) {
    posix_spawn_file_actions_destroy(&actions);
    return res;
  }
  posix_spawn_file_actions_destroy(&actions);
  int status = 0;
  rusage usage{};
  wait4(pid, &status, 0, &usage);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.max_rss_kib = usage.ru_maxrss;
  return res;
}

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Image patterned_image(std::size_t w, std::size_t h) {
  Image img(w, h, 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>((i * 131) % 256) / 255.0f;
  return img;
}

class Acceptance {
 public:
  Acceptance(std::string cli, fs::path work) : cli_(std::move(cli)), work_(std::move(work)) {}

  Outcome token_cap() {
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream detail;
    const auto img = patterned_image(64, 64);
    const PipelineConfig defaults;
    const Pipeline pipe(defaults);
    const auto hd = build_hd_feature(img, pipe), uhd = build_uhd_feature(img, pipe);
    bool ok = hd.tokens() == 1024 && uhd.tokens() == 1024;
    detail << "default hd/uhd tokens " << hd.tokens() << "/" << uhd.tokens();

    std::mt19937_64 rng(1001);
    std::size_t accepted = 0, rejected = 0;
    const std::size_t bases[] = {8, 16, 32};
    for (int it = 0; it < 30; ++it) {
      const std::size_t base = bases[it % 3];
      std::uniform_int_distribution<std::size_t> cap(base * base / 2, base * base * 2), k(0, 2), patch(1, 2),
          dim(1, 3);
      nlohmann::json enc = nlohmann::json::array();
      for (int e = 0; e < 3; ++e) {
        const std::size_t p = patch(rng), grid = base << k(rng);
        enc.push_back({{"name", "e" + std::to_string(e)},
                       {"input_resolution", grid * p},
                       {"patch_size", p},
                       {"embed_dim", dim(rng)}});
      }
      const nlohmann::json j = {{"base_grid", base}, {"token_cap", cap(rng)}, {"encoders", enc}};
      const bool over = base * base > j["token_cap"].get<std::size_t>();
      try {
        const auto cfg = parse_config(j.dump());
        if (over) {
          ok = false;
          detail << "; over-cap config accepted";
          continue;
        }
        const Pipeline p(cfg);
        const auto small = patterned_image(17, 23);
        const auto f = (it % 2) ? build_uhd_feature(small, p) : build_hd_feature(small, p);
        ok = ok && f.tokens() == base * base && f.tokens() <= cfg.token_cap;
        ++accepted;
      } catch (const Error& e) {
        if (!over || e.kind() != ErrorKind::kConfig) {
          ok = false;
          detail << "; unexpected error " << e.what();
        }
        ++rejected;
      }
    }
    const double secs = seconds_since(t0);
    detail << "; random configs accepted " << accepted << ", rejected " << rejected << "; " << secs << " s";
    return {ok && accepted > 0 && rejected > 0 && secs < 1.0, detail.str()};
  }

  Outcome losslessness() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1002);
    std::uniform_int_distribution<std::size_t> half(1, 32), ch(1, 8);
    std::size_t n = 0;
    bool ok = true;
    for (; n < 1000; ++n) {
      const auto fm = check::random_feature_map(2 * half(rng), 2 * half(rng), ch(rng), rng);
      if (!bitwise_equal(depth_to_space(space_to_depth(fm)), fm)) {
        ok = false;
        break;
      }
    }
    const double secs = seconds_since(t0);
    return {ok && secs < 10.0, std::to_string(n) + " maps bitwise round-trip, " + std::to_string(secs) + " s"};
  }

  Outcome resolution_support() {
    const auto image = work_ / "big.ppm";
    {
      Image img(4096, 4096, 3);
      for (std::size_t y = 0; y < 4096; ++y)
        for (std::size_t x = 0; x < 4096; ++x)
          for (std::size_t c = 0; c < 3; ++c)
            img.at(x, y, c) = static_cast<float>((x * 3 + y * 5 + c * 85) % 256) / 255.0f;
      hdft::write_bytes(image, write_pnm(img));
    }
    const auto out = work_ / "big_uhd.hdft";
    const auto r = spawn(cli_, {"encode", "--config", (work_ / "cfg.json").string(), "--image", image.string(),
                                "--mode", "uhd", "--out", out.string()},
                         "/dev/null");
    fs::remove(image);
    if (r.exit_code != 0) return {false, "cli exit " + std::to_string(r.exit_code)};
    const auto shape = hdft::load(out).shape();
    const double gib = static_cast<double>(r.max_rss_kib) / (1024.0 * 1024.0);
    std::ostringstream d;
    d << "dims " << shape_str(shape) << ", peak RSS " << gib << " GiB, " << r.seconds << " s";
    return {shape == Shape{32, 32, 192} && gib < 2.0 && r.seconds < 60.0, d.str()};
  }

  Outcome prefill_accounting() {
    const auto out = work_ / "bench.json";
    const auto r = spawn(cli_,
                         {"bench", "--config", (work_ / "cfg.json").string(), "--image", (work_ / "small.ppm").string(),
                          "--iterations", "1"},
                         out.string());
    if (r.exit_code != 0) return {false, "cli exit " + std::to_string(r.exit_code)};
    const auto bytes = hdft::read_bytes(out);
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    const auto tile = j["tile_calls"].get<std::size_t>(), global = j["global_calls"].get<std::size_t>();
    const auto uhd = j["encoder_calls_uhd"].get<std::size_t>(), hd = j["encoder_calls_hd"].get<std::size_t>();
    std::ostringstream d;
    d << "tile/global " << tile << "/" << global << ", encoder calls UHD:HD " << uhd << ":" << hd;
    return {tile == 4 * global && uhd == 15 && hd == 3, d.str()};
  }

  Outcome gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1005);
    std::uniform_int_distribution<std::size_t> dim(1, 8), rows(1, 4);
    int checked = 0, skipped = 0;
    double worst = 0.0;
    while (checked < 100) {
      const auto r = check::gradient_check<double>(rows(rng), dim(rng), dim(rng), dim(rng), rng, 1e-3);
      if (r.skipped) {
        ++skipped;
        continue;
      }
      worst = std::max({worst, r.gate_error, r.mlp_error});
      ++checked;
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << checked << " instances (" << skipped << " redrawn near relu kinks), worst rel error " << worst << ", "
      << secs << " s";
    return {worst <= 1e-6 && secs < 5.0, d.str()};
  }

  Outcome gate_attenuation() {
    std::mt19937_64 rng(1006);
    std::uniform_int_distribution<std::size_t> dim(1, 8), rows(1, 4);
    bool ok = true;
    for (int it = 0; it < 1000 && ok; ++it) {
      const std::size_t d = dim(rng);
      const auto p = check::random_projection<float>(d, 2, 2, rng);
      const auto x = check::random_tensor<float>({rows(rng), d}, rng, -10, 10);
      const auto y = context_gate_forward(x, p).first;
      for (std::size_t i = 0; i < x.size(); ++i) ok = ok && std::abs(y[i]) <= std::abs(x[i]);
    }
    GatingProjection zero;
    zero.w_gate = Tensor({4, 4});
    zero.b_gate = Tensor({4});
    zero.w1 = Tensor({4, 2});
    zero.b1 = Tensor({2});
    zero.w2 = Tensor({2, 2});
    zero.b2 = Tensor({2});
    const auto x = check::random_tensor<float>({3, 4}, rng, -10, 10);
    const auto y = context_gate_forward(x, zero).first;
    bool half = true;
    for (std::size_t i = 0; i < x.size(); ++i) half = half && y[i] == 0.5f * x[i];
    return {ok && half, std::string("1000 draws |y|<=|x|: ") + (ok ? "yes" : "no") +
                            ", zero-parameter gate gives 0.5x exactly: " + (half ? "yes" : "no")};
  }

  Outcome pooling() {
    std::mt19937_64 rng(1007);
    std::uniform_int_distribution<std::size_t> half(1, 16), ch(1, 8);
    double worst = 0.0;
    for (int it = 0; it < 100; ++it) {
      const auto fm = check::random_feature_map(2 * half(rng), 2 * half(rng), ch(rng), rng);
      const auto a = check::channel_means(fm), b = check::channel_means(avgpool2d(fm));
      for (std::size_t c = 0; c < a.size(); ++c) worst = std::max(worst, std::abs(a[c] - b[c]));
    }
    const float four = avgpool2d(FeatureMap(Tensor({2, 2, 1}, {1, 3, 5, 7}))).at(0, 0, 0);
    std::ostringstream d;
    d << "worst channel-mean drift " << worst << ", [[1,3],[5,7]] -> " << four;
    return {worst <= 1e-5 && four == 4.0f, d.str()};
  }

  Outcome determinism() {
    std::ostringstream d;
    bool ok = true;
    for (const char* mode : {"hd", "uhd"}) {
      std::uint64_t hashes[2];
      for (int run = 0; run < 2; ++run) {
        const auto out = work_ / ("det_" + std::string(mode) + std::to_string(run) + ".hdft");
        const auto r = spawn(cli_, {"encode", "--config", (work_ / "cfg.json").string(), "--image",
                                    (work_ / "small.ppm").string(), "--mode", mode, "--out", out.string()},
                             "/dev/null");
        if (r.exit_code != 0) return {false, "cli exit " + std::to_string(r.exit_code)};
        hashes[run] = fnv1a(hdft::read_bytes(out));
      }
      ok = ok && hashes[0] == hashes[1];
      d << mode << " " << std::hex << hashes[0] << (hashes[0] == hashes[1] ? " == " : " != ") << hashes[1]
        << std::dec << "; ";
    }
    return {ok, d.str()};
  }

  Outcome oracles() {
    std::mt19937_64 rng(1009);
    std::uniform_int_distribution<std::size_t> small(1, 10), half(1, 8), ch(1, 6);
    int matmul_ok = 0, pool_ok = 0, s2d_ok = 0;
    for (int it = 0; it < 100; ++it) {
      const auto m = small(rng), k = small(rng), n = small(rng);
      const auto a = check::random_tensor<float>({m, k}, rng), b = check::random_tensor<float>({k, n}, rng);
      matmul_ok += bitwise_equal(matmul(a, b), check::naive_matmul(a, b));
      const auto fm = check::random_feature_map(2 * half(rng), 2 * half(rng), ch(rng), rng);
      pool_ok += bitwise_equal(avgpool2d(fm), check::naive_avgpool(fm, 2));
      s2d_ok += bitwise_equal(space_to_depth(fm), check::naive_space_to_depth(fm, 2));
    }
    std::ostringstream d;
    d << "exact matches: matmul " << matmul_ok << "/100, avgpool2d " << pool_ok << "/100, space_to_depth " << s2d_ok
      << "/100";
    return {matmul_ok == 100 && pool_ok == 100 && s2d_ok == 100, d.str()};
  }

 private:
  std::string cli_;
  fs::path work_;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <path-to-hdfeat-cli>\n";
    return 2;
  }
  const fs::path work = fs::temp_directory_path() / ("hdfeat_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);
  cli::write_text((work / "cfg.json").string(), "{}");
  hdft::write_bytes(work / "small.ppm", write_pnm(patterned_image(64, 64)));

  Acceptance acc(argv[1], work);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 token cap", [&] { return acc.token_cap(); }},
      {"2 losslessness", [&] { return acc.losslessness(); }},
      {"3 resolution support 4096x4096", [&] { return acc.resolution_support(); }},
      {"4 prefill accounting", [&] { return acc.prefill_accounting(); }},
      {"5 gradient correctness", [&] { return acc.gradients(); }},
      {"6 gate attenuation", [&] { return acc.gate_attenuation(); }},
      {"7 pooling conservation", [&] { return acc.pooling(); }},
      {"8 determinism", [&] { return acc.determinism(); }},
      {"9 oracle equivalence", [&] { return acc.oracles(); }},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " -- " << o.detail << std::endl;
    failed += !o.pass;
  }
  fs::remove_all(work);
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criteria failed" : "acceptance: all criteria passed")
            << std::endl;
  return failed ? 1 : 0;
}
