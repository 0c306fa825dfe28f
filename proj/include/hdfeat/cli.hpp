#pragma once

// `hdfeat` command-line front end: encode, bench, selftest, init-params.
//
// Exit codes: 0 ok, 1 parse/config error, 2 geometry/budget error, 3 I/O error,
// 4 self-test failure. Every error prints an `error_code=N kind=K` line to stderr.

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hdfeat/config.hpp"
#include "hdfeat/error.hpp"
#include "hdfeat/fusion.hpp"
#include "hdfeat/hdft.hpp"
#include "hdfeat/imageio.hpp"
#include "hdfeat/projection.hpp"
#include "hdfeat/report.hpp"
#include "hdfeat/selftest.hpp"
#include "hdfeat/testing_hooks.hpp"
#include "hdfeat/timing.hpp"
#include "hdfeat/uhd.hpp"

namespace hdfeat::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kGeometryError = 2, kIoError = 3, kSelfTestFailed = 4 };

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::kParse:
    case ErrorKind::kConfig: return kConfigError;
    case ErrorKind::kShape:
    case ErrorKind::kGeometry:
    case ErrorKind::kBudget:
    case ErrorKind::kCache: return kGeometryError;
    case ErrorKind::kIo: return kIoError;
  }
  return kConfigError;
}

inline PipelineConfig load_config(const std::string& path) {
  const auto bytes = hdft::read_bytes(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

inline void write_text(const std::string& path, const std::string& text) {
  hdft::write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline GatingProjection projection_for(const PipelineConfig& cfg, Mode mode, const std::string& params_dir) {
  if (!params_dir.empty()) return load_params(params_dir);
  const std::size_t d = fused_channels(cfg, mode);
  return GatingProjection::init(d, hidden_width(cfg, mode), cfg.llm_dim, cfg.seed);
}

struct EncodeArgs {
  std::string config, image, mode, out, report, params;
  bool project = false;
};

inline int cmd_encode(const EncodeArgs& a, std::ostream& out) {
  StageTimes times;
  PipelineConfig cfg = load_config(a.config);
  const Mode mode = parse_mode(a.mode);
  cfg.mode = mode;
  Image img;
  {
    ScopedStage s(&times, "load");
    img = load_pnm_file(a.image);
  }
  const Pipeline pipeline(cfg);
  const FeatureMap feature = build_feature(img, pipeline, mode, &times);
  Tensor result = feature.tensor();
  if (a.project) {
    const auto p = projection_for(cfg, mode, a.params);
    ScopedStage s(&times, "project");
    result = project(feature, p);
  }
  {
    ScopedStage s(&times, "write");
    hdft::save(a.out, result);
  }
  RunReport report = make_report(pipeline, mode, feature);
  report.projected = a.project;
  report.output_shape = result.shape();
  report.stage_timings = times;
  if (!a.report.empty()) write_text(a.report, to_json(report).dump(2) + "\n");
  out << "wrote " << a.out << " " << shape_str(result.shape()) << "\n";
  return kOk;
}

struct BenchArgs {
  std::string config, image;
  std::size_t iterations = 1;
};

inline nlohmann::json stage_stats(const std::vector<StageTimes>& runs) {
  std::map<std::string, std::vector<double>> per_stage;
  for (const auto& r : runs) {
    double total = 0.0;
    for (const auto& [k, v] : r) {
      per_stage[k].push_back(v);
      total += v;
    }
    per_stage["total"].push_back(total);
  }
  nlohmann::json j = nlohmann::json::object();
  for (auto& [k, v] : per_stage) {
    std::sort(v.begin(), v.end());
    const double median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    j[k] = {{"median_ms", median}, {"min_ms", v.front()}};
  }
  return j;
}

inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.iterations == 0) throw Error(ErrorKind::kConfig, "--iterations must be >= 1");
  const PipelineConfig cfg = load_config(a.config);
  const Image img = load_pnm_file(a.image);
  nlohmann::json modes = nlohmann::json::object();
  std::map<Mode, std::size_t> calls, tokens;
  for (Mode mode : {Mode::kHd, Mode::kUhd}) {
    Pipeline pipeline(cfg);
    std::vector<StageTimes> runs;
    std::size_t token_count = 0, channels = 0;
    for (std::size_t it = 0; it < a.iterations; ++it) {
      StageTimes t;
      const auto fm = build_feature(img, pipeline, mode, &t);
      token_count = fm.tokens();
      channels = fm.channels();
      runs.push_back(std::move(t));
    }
    const std::size_t per_run_calls = pipeline.encoder_calls() / a.iterations;
    const std::size_t per_run_images = pipeline.images_encoded() / a.iterations;
    const auto inv = count_invocations(mode, cfg.encoders.size());
    calls[mode] = per_run_calls;
    tokens[mode] = token_count;
    modes[std::string(mode_name(mode))] = {
        {"token_count", token_count},   {"channels", channels},
        {"images_encoded", per_run_images}, {"encoder_calls", per_run_calls},
        {"global_passes", inv.global_passes}, {"tile_passes", inv.tile_passes},
        {"stage_timings", stage_stats(runs)},
    };
  }
  const std::size_t n_enc = cfg.encoders.size();
  const auto uhd = count_invocations(Mode::kUhd, n_enc);
  const std::size_t tile_calls = uhd.tile_passes * n_enc;
  const std::size_t global_calls = uhd.global_passes * n_enc;
  nlohmann::json j = {
      {"config_digest", config_digest(cfg)},
      {"iterations", a.iterations},
      {"modes", modes},
      {"encoder_calls_hd", calls[Mode::kHd]},
      {"encoder_calls_uhd", calls[Mode::kUhd]},
      {"encoder_call_ratio_uhd_hd", static_cast<double>(calls[Mode::kUhd]) / static_cast<double>(calls[Mode::kHd])},
      {"tile_calls", tile_calls},
      {"global_calls", global_calls},
      {"tile_to_global_ratio", static_cast<double>(tile_calls) / static_cast<double>(global_calls)},
      {"token_count_equal", tokens[Mode::kHd] == tokens[Mode::kUhd]},
  };
  out << j.dump(2) << "\n";
  return kOk;
}

inline int cmd_selftest(const std::string& inject_fault, std::ostream& out) {
  if (!inject_fault.empty() && inject_fault != "depth_to_space_order") {
    throw Error(ErrorKind::kConfig, "unknown fault '" + inject_fault + "'");
  }
  struct Restore {
    ~Restore() { testing::corrupt_depth_to_space_order = false; }
  } restore;
  testing::corrupt_depth_to_space_order = inject_fault == "depth_to_space_order";
  const bool ok = selftest::run_all(out);
  out << (ok ? "selftest: all suites passed\n" : "selftest: FAILED\n");
  return ok ? kOk : kSelfTestFailed;
}

inline int cmd_init_params(const std::string& config, const std::string& mode, const std::string& dir,
                           std::ostream& out) {
  PipelineConfig cfg = load_config(config);
  const Mode m = parse_mode(mode);
  const auto p = projection_for(cfg, m, "");
  save_params(dir, p);
  out << "wrote projection " << p.in_dim() << "->" << p.hidden_dim() << "->" << p.out_dim() << " to " << dir << "\n";
  return kOk;
}

inline int report_error(std::ostream& err, int code, std::string_view kind, std::string_view message) {
  err << "error_code=" << code << " kind=" << kind << "\n" << message << "\n";
  return code;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"High-resolution visual feature pipeline"};
  app.require_subcommand(1);

  EncodeArgs enc;
  auto* encode = app.add_subcommand("encode", "Encode an image into an HD/UHD feature (HDFT)");
  encode->add_option("--config", enc.config, "Pipeline config JSON")->required();
  encode->add_option("--image", enc.image, "Input image (binary PPM/PGM)")->required();
  encode->add_option("--mode", enc.mode, "hd or uhd")->required()->check(CLI::IsMember({"hd", "uhd"}));
  encode->add_option("--out", enc.out, "Output HDFT path")->required();
  encode->add_option("--report", enc.report, "Write a JSON run report here");
  encode->add_flag("--project", enc.project, "Apply the gated projection and write tokens instead");
  encode->add_option("--params", enc.params, "Directory of projection HDFT parameters (default: seeded init)");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time both modes and report encoder accounting as JSON");
  bench_cmd->add_option("--config", bench.config)->required();
  bench_cmd->add_option("--image", bench.image)->required();
  bench_cmd->add_option("--iterations", bench.iterations)->required();

  std::string fault;
  auto* self = app.add_subcommand("selftest", "Run the built-in invariant suites");
  self->add_option("--inject-fault", fault, "Test hook: deliberately break a kernel")->group("");

  std::string ip_config, ip_mode = "hd", ip_out;
  auto* init = app.add_subcommand("init-params", "Write seeded projection parameters as HDFT files");
  init->add_option("--config", ip_config)->required();
  init->add_option("--mode", ip_mode)->check(CLI::IsMember({"hd", "uhd"}));
  init->add_option("--out", ip_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return report_error(err, kConfigError, "usage", e.what());
  }

  try {
    if (*encode) return cmd_encode(enc, out);
    if (*bench_cmd) return cmd_bench(bench, out);
    if (*self) return cmd_selftest(fault, out);
    if (*init) return cmd_init_params(ip_config, ip_mode, ip_out, out);
  } catch (const Error& e) {
    return report_error(err, exit_code_for(e.kind()), kind_name(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return report_error(err, kGeometryError, "memory", "out of memory");
  } catch (const std::exception& e) {
    return report_error(err, kConfigError, "internal", e.what());
  }
  return kConfigError;
}

}  // namespace hdfeat::cli
