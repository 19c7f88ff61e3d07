// evkd: command-line front end.
//
// Exit codes: 0 success, 1 findings (validation, failed self-check),
// 2 usage error, 3 I/O or input-data error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "evkd/dataset.hpp"
#include "evkd/events.hpp"
#include "evkd/inference.hpp"
#include "evkd/kd_check.hpp"
#include "evkd/metrics.hpp"
#include "evkd/synthetic.hpp"
#include "evkd/text_io.hpp"
#include "evkd/toy_tracker.hpp"

namespace fs = std::filesystem;
using namespace evkd;

namespace {

constexpr int kOk = 0;
constexpr int kFindings = 1;
constexpr int kUsage = 2;
constexpr int kIoError = 3;

struct GeometryFlags {
  std::uint32_t width = kEventVotGeometry.width;
  std::uint32_t height = kEventVotGeometry.height;
  SensorGeometry get() const { return {width, height}; }
};

void add_geometry(CLI::App* cmd, GeometryFlags& g) {
  cmd->add_option("--width", g.width, "Sensor width for CSV input")->capture_default_str();
  cmd->add_option("--height", g.height, "Sensor height for CSV input")->capture_default_str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir + ": " + ec.message());
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// ---------------------------------------------------------------------------

struct StackArgs {
  std::string input, out;
  std::size_t frames = kEventVotFramesPerVideo;
  bool images = false;
  GeometryFlags geometry;
};

int cmd_stack(const StackArgs& a) {
  const auto stream = load_event_file(a.input, a.geometry.get());
  ensure_dir(a.out);
  std::string manifest = "frame,t_start,t_end,on,off,total\n";
  std::uint64_t total = 0;
  if (a.images) {
    const auto frames = stack_to_frames(stream, a.frames);
    char name[32];
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const auto& fr = frames[f];
      const std::uint64_t on = fr.counts_on.template cast<std::uint64_t>().sum();
      const std::uint64_t off = fr.counts_off.template cast<std::uint64_t>().sum();
      manifest += std::to_string(f) + "," + std::to_string(fr.t_start) + "," + std::to_string(fr.t_end) + "," +
                  std::to_string(on) + "," + std::to_string(off) + "," + std::to_string(on + off) + "\n";
      total += on + off;
      std::snprintf(name, sizeof name, "frame_%04zu.ppm", f);
      write_file(path_in(a.out, name), encode_ppm(render_event_image(fr)));
    }
  } else {
    if (stream.empty()) throw Error(Errc::EmptyStream, "no events in " + a.input);
    const auto windows = frame_windows(stream, a.frames);
    std::vector<std::uint64_t> on(a.frames, 0), off(a.frames, 0);
    const std::uint64_t span = stream.t_max() - stream.t_min() + 1;
    for (const auto& e : stream.events) {
      const auto f = frame_index(e.t, stream.t_min(), span, a.frames);
      (e.p == Polarity::On ? on : off)[f] += 1;
    }
    for (std::size_t f = 0; f < a.frames; ++f) {
      manifest += std::to_string(f) + "," + std::to_string(windows[f].t_start) + "," +
                  std::to_string(windows[f].t_end) + "," + std::to_string(on[f]) + "," + std::to_string(off[f]) +
                  "," + std::to_string(on[f] + off[f]) + "\n";
      total += on[f] + off[f];
    }
  }
  write_file(path_in(a.out, "frames.csv"), manifest);
  std::cout << "frames " << a.frames << "\nevents " << stream.size() << "\nstacked " << total << "\n";
  return total == stream.size() ? kOk : kFindings;
}

// ---------------------------------------------------------------------------

struct VoxelArgs {
  std::string input, out;
  std::uint32_t a = 16, b = 16;
  std::uint64_t c = 0;
  unsigned threads = 0;
  GeometryFlags geometry;
};

int cmd_voxelize(const VoxelArgs& a) {
  const auto stream = load_event_file(a.input, a.geometry.get());
  if (stream.empty()) throw Error(Errc::EmptyStream, "no events in " + a.input);
  const std::uint64_t c = a.c ? a.c : default_voxel_duration(stream);
  const auto grid = build_voxel_grid(stream, a.a, a.b, c, a.threads);
  ensure_dir(a.out);
  std::string bytes;
  bytes.reserve(grid.counts.size() * 4);
  for (auto v : grid.counts) {
    for (int k = 0; k < 4; ++k) bytes += static_cast<char>((v >> (8 * k)) & 0xFF);
  }
  write_file(path_in(a.out, "voxels.bin"), bytes);
  nlohmann::ordered_json j;
  j["dtype"] = "u32le";
  j["order"] = "t,y,x";
  j["nx"] = grid.nx;
  j["ny"] = grid.ny;
  j["nt"] = grid.nt;
  j["cell_x"] = grid.cell_x;
  j["cell_y"] = grid.cell_y;
  j["cell_t"] = grid.cell_t;
  j["t_origin"] = grid.t_origin;
  j["events"] = stream.size();
  j["total"] = grid.total();
  write_file(path_in(a.out, "voxels.json"), j.dump(2) + "\n");
  std::cout << "voxels " << grid.nx << "x" << grid.ny << "x" << grid.nt << "\nevents " << stream.size() << "\ntotal "
            << grid.total() << "\n";
  return grid.total() == stream.size() ? kOk : kFindings;
}

// ---------------------------------------------------------------------------

struct KdCheckArgs {
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  std::string out;
};

int cmd_kd_check(const KdCheckArgs& a) {
  const auto report = run_kd_check(a.seed, a.trials);
  const auto csv = format_kd_check(report);
  std::cout << csv;
  if (!a.out.empty()) write_file(a.out, csv);
  return report.pass() ? kOk : kFindings;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string results, dataset, report, curves, attributes, svg, split;
};

int cmd_eval(const EvalArgs& a) {
  std::optional<Split> split;
  if (!a.split.empty()) {
    for (auto s : kSplits)
      if (split_name(s) == a.split) split = s;
    if (!split) throw Error(Errc::InvalidArgument, "unknown split " + a.split);
  }
  const auto manifest = load_manifest(a.dataset);
  const auto runs = load_runs(manifest, a.results, split);
  if (runs.empty()) throw Error(Errc::EmptyRun, "no videos selected");
  const auto report = aggregate(runs);
  std::cout << "videos " << runs.size() << "\nSR " << fixed4(report.sr) << "\nPR " << fixed4(report.pr) << "\nNPR "
            << fixed4(report.npr) << "\n";
  if (!a.report.empty()) write_file(a.report, report_csv(report));
  if (!a.curves.empty()) write_file(a.curves, curves_csv(report));
  if (!a.attributes.empty()) write_file(a.attributes, attributes_csv(attribute_breakdown(runs)));
  if (!a.svg.empty()) write_file(a.svg, curves_svg(report));
  return kOk;
}

// ---------------------------------------------------------------------------

struct AsrArgs {
  std::string trace, out;
  AsrParams params;
};

int cmd_asr_sim(const AsrArgs& a) {
  const std::string text = a.trace == "-" ? std::string(std::istreambuf_iterator<char>(std::cin), {}) : read_file(a.trace);
  std::string csv = "step,iou,failures,expanded,multiplier\n";
  AsrState state;
  std::size_t step = 0;
  for (auto line : lines_of(text)) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    double iou_prev = 0;
    if (!parse_double(line, iou_prev)) throw Error(Errc::MalformedLine, "bad IoU value \"" + std::string(line) + "\"");
    const auto next = asr_step(state, iou_prev, a.params);
    state = next.state;
    csv += std::to_string(step++) + "," + fixed4(iou_prev) + "," + std::to_string(state.consecutive_failures) + "," +
           (state.expanded ? "1" : "0") + "," + fixed4(next.multiplier) + "\n";
  }
  std::cout << csv;
  if (!a.out.empty()) write_file(a.out, csv);
  return kOk;
}

// ---------------------------------------------------------------------------

struct TttArgs {
  std::string video, out, params;
  std::uint64_t synthetic_seed = 1;
  std::uint64_t params_seed = 0;
  TttConfig cfg;
  bool no_asr = false;
};

int cmd_ttt_sim(const TttArgs& a) {
  ToyVideo video;
  if (!a.video.empty()) {
    video = load_video_fixture(a.video);
  } else {
    SyntheticVideoSpec spec;
    spec.seed = a.synthetic_seed;
    video = make_synthetic_video(spec);
  }
  ToyTrackerConfig tcfg;
  tcfg.use_asr = !a.no_asr;
  const ToyTracker tracker(video, tcfg);
  const ToyParams params = a.params.empty() ? make_tracking_params(a.params_seed, tcfg) : load_params(a.params);

  const auto base = tracker.track(params);
  const auto result = ttt_schedule(tracker, params, make_ttt_adapter(params, a.cfg), a.cfg);
  const auto tuned = tracker.track(params, &result.adapter);

  ensure_dir(a.out);
  write_file(path_in(a.out, "base.txt"), format_boxes(base.boxes));
  write_file(path_in(a.out, "tuned.txt"), format_boxes(tuned.boxes));
  const auto log = format_ttt_log(result.log);
  write_file(path_in(a.out, "ttt_log.csv"), log);
  std::cout << log;
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string input;
  std::size_t synthetic = 0;
  std::size_t repeat = 3;
  std::uint32_t a = 16, b = 16;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  GeometryFlags geometry;
};

int cmd_bench(const BenchArgs& a) {
  if (a.input.empty() == (a.synthetic == 0)) throw Error(Errc::InvalidArgument, "give exactly one of --input, --synthetic");
  if (a.repeat == 0) throw Error(Errc::InvalidArgument, "--repeat must be positive");
  std::string bytes;
  EventFormat format = EventFormat::Bin;
  if (!a.input.empty()) {
    bytes = read_file(a.input);
    format = sniff_event_format(bytes);
  } else {
    bytes = write_event_stream(make_random_stream(a.synthetic, kEventVotGeometry, 10'000'000, a.seed), EventFormat::Bin);
  }
  using clock = std::chrono::steady_clock;
  double best_parse = 1e300, best_vox = 1e300;
  std::size_t events = 0;
  std::uint64_t voxel_total = 0;
  for (std::size_t r = 0; r < a.repeat; ++r) {
    const auto t0 = clock::now();
    const auto stream = parse_event_stream(bytes, format, a.geometry.get());
    const auto t1 = clock::now();
    const auto grid = build_voxel_grid(stream, a.a, a.b, default_voxel_duration(stream), a.threads);
    const auto t2 = clock::now();
    best_parse = std::min(best_parse, std::chrono::duration<double>(t1 - t0).count());
    best_vox = std::min(best_vox, std::chrono::duration<double>(t2 - t1).count());
    events = stream.size();
    voxel_total = grid.total();
  }
  const double n = static_cast<double>(events);
  std::cout << "events " << events << "\nvoxel_total " << voxel_total << "\nrepeat " << a.repeat
            << "\nparse_events_per_s " << fixed4(n / best_parse) << "\nvoxelize_events_per_s " << fixed4(n / best_vox)
            << "\ncombined_events_per_s " << fixed4(n / (best_parse + best_vox)) << "\n";
  return voxel_total == events ? kOk : kFindings;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::string dataset, report;
  bool full = false;
  std::size_t frames = kEventVotFramesPerVideo;
  GeometryFlags geometry;
};

int cmd_validate(const ValidateArgs& a) {
  ValidationOptions opts;
  opts.expected_frames = a.frames;
  opts.geometry = a.geometry.get();
  if (a.full) opts.expected_splits = kEventVotSplits;
  const auto report = validate_root(a.dataset, opts);
  for (const auto& f : report.findings) {
    std::cout << finding_name(f.kind) << "," << f.video << "," << (f.frame ? std::to_string(*f.frame) : "") << ","
              << f.detail << "\n";
  }
  std::cout << "findings " << report.findings.size() << "\n";
  if (!a.report.empty()) write_file(a.report, report_to_json(report));
  return report.clean() ? kOk : kFindings;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string kind = "video";
  std::size_t events = 100000;
  std::uint64_t span = 1'000'000;
  std::string format = "bin";
  SyntheticVideoSpec video;
  GeometryFlags geometry;
};

int cmd_synth(const SynthArgs& a) {
  if (a.kind == "video") {
    save_video_fixture(make_synthetic_video(a.video), a.out);
    std::cout << "video " << a.out << "\n";
    return kOk;
  }
  if (a.kind == "stream") {
    const auto fmt = a.format == "csv" ? EventFormat::Csv : EventFormat::Bin;
    const auto s = make_random_stream(a.events, a.geometry.get(), a.span, a.video.seed);
    save_event_file(s, a.out, fmt);
    std::cout << "events " << s.size() << "\n";
    return kOk;
  }
  throw Error(Errc::InvalidArgument, "unknown kind " + a.kind);
}

struct ImportArgs {
  std::string src, dst;
};

int cmd_import(const ImportArgs& a) {
  const auto summary = import_released_layout(a.src, a.dst);
  for (const auto& n : summary.notes) std::cout << "note " << n << "\n";
  std::cout << "videos " << summary.videos << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera tracking toolkit: stacking, distillation checks, inference strategies, evaluation"};
  app.set_config("--config", "", "key=value file presetting any flag");
  app.require_subcommand(1);

  StackArgs stack;
  auto* c_stack = app.add_subcommand("stack", "Stack events into fixed-count frames");
  c_stack->add_option("--input", stack.input, "Event file (.bin or .csv)")->required();
  c_stack->add_option("--frames", stack.frames, "Frame count")->capture_default_str()->check(CLI::PositiveNumber);
  c_stack->add_option("--out", stack.out, "Output directory")->required();
  c_stack->add_flag("--images", stack.images, "Also write one PPM per frame");
  add_geometry(c_stack, stack.geometry);

  VoxelArgs vox;
  auto* c_vox = app.add_subcommand("voxelize", "Count events per (a x b x c) voxel");
  c_vox->add_option("--input", vox.input, "Event file")->required();
  c_vox->add_option("--a", vox.a, "Cell width, px")->capture_default_str()->check(CLI::PositiveNumber);
  c_vox->add_option("--b", vox.b, "Cell height, px")->capture_default_str()->check(CLI::PositiveNumber);
  c_vox->add_option("--c", vox.c, "Cell duration, us (0: span / 5)")->capture_default_str();
  c_vox->add_option("--threads", vox.threads, "Worker count (0: EVKD_THREADS)")->capture_default_str();
  c_vox->add_option("--out", vox.out, "Output directory")->required();
  add_geometry(c_vox, vox.geometry);

  KdCheckArgs kd;
  auto* c_kd = app.add_subcommand("kd-check", "Finite-difference check of every loss gradient");
  c_kd->add_option("--seed", kd.seed)->capture_default_str();
  c_kd->add_option("--trials", kd.trials)->capture_default_str()->check(CLI::PositiveNumber);
  c_kd->add_option("--out", kd.out, "Also write the report CSV here");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "SR / PR / NPR over a result directory");
  c_eval->add_option("--results", ev.results, "Directory of <video_id>.txt files")->required();
  c_eval->add_option("--dataset", ev.dataset, "Dataset root")->required();
  c_eval->add_option("--split", ev.split, "train, val or test (default: all)");
  c_eval->add_option("--report", ev.report, "Summary CSV");
  c_eval->add_option("--curves", ev.curves, "Curve CSV");
  c_eval->add_option("--attributes", ev.attributes, "Per-attribute CSV");
  c_eval->add_option("--svg", ev.svg, "Curve plot");

  AsrArgs asr;
  auto* c_asr = app.add_subcommand("asr-sim", "Replay an IoU trace through the search-region controller");
  c_asr->add_option("--iou-trace", asr.trace, "One IoU per line ('-' for stdin)")->required();
  c_asr->add_option("--tau", asr.params.tau)->capture_default_str();
  c_asr->add_option("--k", asr.params.k)->capture_default_str();
  c_asr->add_option("--theta", asr.params.theta)->capture_default_str();
  c_asr->add_option("--out", asr.out, "Also write the trace CSV here");

  TttArgs ttt;
  auto* c_ttt = app.add_subcommand("ttt-sim", "Test-time tuning on the toy tracker");
  c_ttt->add_option("--video", ttt.video, "Video fixture directory (default: synthetic)");
  c_ttt->add_option("--synthetic-seed", ttt.synthetic_seed)->capture_default_str();
  c_ttt->add_option("--params", ttt.params, "Base weights stem (default: structured init)");
  c_ttt->add_option("--params-seed", ttt.params_seed)->capture_default_str();
  c_ttt->add_option("--n", ttt.cfg.n_frames, "Pseudo-labelled frames")->capture_default_str();
  c_ttt->add_option("--epochs", ttt.cfg.epochs)->capture_default_str();
  c_ttt->add_option("--lr", ttt.cfg.lr)->capture_default_str();
  c_ttt->add_option("--wd", ttt.cfg.weight_decay)->capture_default_str();
  c_ttt->add_option("--rank", ttt.cfg.lora_rank)->capture_default_str();
  c_ttt->add_option("--alpha", ttt.cfg.lora_alpha)->capture_default_str();
  c_ttt->add_option("--seed", ttt.cfg.seed, "Adapter init seed")->capture_default_str();
  c_ttt->add_flag("--no-asr", ttt.no_asr);
  c_ttt->add_option("--out", ttt.out, "Output directory")->required();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Parse and voxelize throughput");
  c_bench->add_option("--input", bench.input, "Event file");
  c_bench->add_option("--synthetic", bench.synthetic, "Generate this many events instead");
  c_bench->add_option("--repeat", bench.repeat)->capture_default_str();
  c_bench->add_option("--a", bench.a)->capture_default_str();
  c_bench->add_option("--b", bench.b)->capture_default_str();
  c_bench->add_option("--threads", bench.threads, "Worker count (0: EVKD_THREADS)")->capture_default_str();
  c_bench->add_option("--seed", bench.seed)->capture_default_str();
  add_geometry(c_bench, bench.geometry);

  ValidateArgs val;
  auto* c_val = app.add_subcommand("validate", "Check a dataset tree");
  c_val->add_option("--dataset", val.dataset, "Dataset root")->required();
  c_val->add_flag("--full", val.full, "Require the full-release split sizes");
  c_val->add_option("--frames", val.frames, "Expected frames per video")->capture_default_str();
  c_val->add_option("--report", val.report, "JSON report");
  add_geometry(c_val, val.geometry);

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Write synthetic fixtures");
  c_syn->add_option("--kind", syn.kind, "video or stream")->capture_default_str();
  c_syn->add_option("--out", syn.out, "Directory (video) or file (stream)")->required();
  c_syn->add_option("--seed", syn.video.seed)->capture_default_str();
  c_syn->add_option("--frames", syn.video.num_frames)->capture_default_str();
  c_syn->add_option("--vx", syn.video.vx)->capture_default_str();
  c_syn->add_option("--vy", syn.video.vy)->capture_default_str();
  c_syn->add_option("--events", syn.events, "Stream event count")->capture_default_str();
  c_syn->add_option("--span", syn.span, "Stream span, us")->capture_default_str();
  c_syn->add_option("--format", syn.format, "bin or csv")->capture_default_str();
  add_geometry(c_syn, syn.geometry);

  ImportArgs imp;
  auto* c_imp = app.add_subcommand("import", "Convert a released dataset layout");
  c_imp->add_option("--src", imp.src)->required();
  c_imp->add_option("--dst", imp.dst)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (c_stack->parsed()) return cmd_stack(stack);
    if (c_vox->parsed()) return cmd_voxelize(vox);
    if (c_kd->parsed()) return cmd_kd_check(kd);
    if (c_eval->parsed()) return cmd_eval(ev);
    if (c_asr->parsed()) return cmd_asr_sim(asr);
    if (c_ttt->parsed()) return cmd_ttt_sim(ttt);
    if (c_bench->parsed()) return cmd_bench(bench);
    if (c_val->parsed()) return cmd_validate(val);
    if (c_syn->parsed()) return cmd_synth(syn);
    if (c_imp->parsed()) return cmd_import(imp);
  } catch (const Error& e) {
    std::cerr << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return e.code() == Errc::InvalidArgument ? kUsage : kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kUsage;
}
