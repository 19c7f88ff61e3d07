#include "evkd/toy_tracker.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "evkd/dataset.hpp"
#include "evkd/text_io.hpp"

namespace evkd {

namespace fs = std::filesystem;

ToyVideo load_video_fixture(const std::string& dir, SensorGeometry csv_geometry) {
  const fs::path root(dir);
  fs::path events = root / "events.bin";
  if (!fs::exists(events)) events = root / "events.csv";
  if (!fs::exists(events)) throw Error(Errc::Io, "no events.bin or events.csv in " + dir);
  ToyVideo video;
  video.stream = load_event_file(events.string(), csv_geometry);
  const auto ann = load_annotations((root / "groundtruth.txt").string());
  if (ann.empty()) throw Error(Errc::MalformedLine, "groundtruth.txt is empty");
  if (ann.front().absent || !ann.front().box.valid()) throw Error(Errc::InvalidBox, "first frame must hold a box");
  video.num_frames = ann.size();
  video.init_box = ann.front().box;
  for (const auto& a : ann) video.ground_truth.push_back(a.box);
  return video;
}

void save_video_fixture(const ToyVideo& video, const std::string& dir) {
  fs::create_directories(dir);
  save_event_file(video.stream, (fs::path(dir) / "events.bin").string(), EventFormat::Bin);
  std::vector<AnnotatedFrame> ann;
  if (video.ground_truth.empty()) {
    ann.assign(video.num_frames, AnnotatedFrame{video.init_box, false});
  } else {
    for (const auto& b : video.ground_truth) ann.push_back({b, false});
  }
  write_file((fs::path(dir) / "groundtruth.txt").string(), format_annotations(ann));
}

ToyParams make_tracking_params(std::uint64_t seed, const ToyTrackerConfig& cfg, Index map_side, double gain,
                               double noise) {
  const Index fsd = cfg.feature_side;
  ToyParams p = make_toy_params(seed, fsd * fsd, map_side, map_side, noise);
  // Each score cell reads a Gaussian-weighted average of the features
  // around its center (one feature cell of spread), so a blob or a ring of
  // edge events peaks at its middle.
  const double ratio = static_cast<double>(fsd) / static_cast<double>(map_side);
  for (Index r = 0; r < map_side; ++r) {
    for (Index c = 0; c < map_side; ++c) {
      const double fy = (static_cast<double>(r) + 0.5) * ratio - 0.5;
      const double fx = (static_cast<double>(c) + 0.5) * ratio - 0.5;
      Vecd w(fsd * fsd);
      for (Index fr = 0; fr < fsd; ++fr) {
        for (Index fc = 0; fc < fsd; ++fc) {
          const double dy = fy - static_cast<double>(fr), dx = fx - static_cast<double>(fc);
          w[fr * fsd + fc] = std::exp(-0.5 * (dx * dx + dy * dy));
        }
      }
      p.weight.row(r * map_side + c) += gain * w.transpose() / w.sum();
    }
  }
  return p;
}

namespace {

// Counts events whose pixel centers fall in each cell of a side x side grid
// laid over the window, flattened row-major.
Vecd pool_events(std::span<const EventPoint> events, double left, double top, double extent, Index side) {
  Vecd out = Vecd::Zero(side * side);
  const double inv = static_cast<double>(side) / extent;
  for (const auto& e : events) {
    const double u = (e.x + 0.5 - left) * inv;
    const double v = (e.y + 0.5 - top) * inv;
    if (u < 0 || v < 0 || u >= static_cast<double>(side) || v >= static_cast<double>(side)) continue;
    out[static_cast<Index>(v) * side + static_cast<Index>(u)] += 1.0;
  }
  return out;
}

Index argmax_row_major(const Gridd& m) {
  Index best = 0;
  for (Index i = 1; i < m.size(); ++i)
    if (m.data()[i] > m.data()[best]) best = i;
  return best;
}

}  // namespace

ToyTracker::ToyTracker(const ToyVideo& video, ToyTrackerConfig cfg) : cfg_(cfg), init_box_(video.init_box) {
  if (video.num_frames < 2) throw Error(Errc::VideoTooShort, "need at least two frames");
  if (!video.init_box.valid()) throw Error(Errc::DegenerateBox, "init box must have positive size");
  if (cfg_.feature_side < 1 || cfg_.n_templates < 1) throw Error(Errc::InvalidArgument, "bad tracker config");
  if (video.stream.empty()) throw Error(Errc::EmptyStream, "video has no events");

  // Events grouped by stacked frame; features are pooled straight from the
  // events so no dense frame is ever materialized.
  const auto& s = video.stream;
  const auto span = s.t_max() - s.t_min() + 1;
  events_.resize(video.num_frames);
  for (const auto& e : s.events) events_[frame_index(e.t, s.t_min(), span, video.num_frames)].push_back(e);

  // Templates from the first frame's events at decreasing sparsity.
  const Box& b = init_box_;
  const double side = cfg_.template_context * std::sqrt(b.w * b.h);
  const double left = b.cx() - 0.5 * side;
  const double top = b.cy() - 0.5 * side;
  std::vector<Vecd> raw;
  if (events_[0].empty()) {
    raw.assign(cfg_.n_templates, Vecd::Zero(in_features()));
  } else {
    const auto aug = template_augment(EventStream{s.geometry, events_[0]}, cfg_.n_templates, cfg_.template_seed);
    for (const auto& t : aug) raw.push_back(pool_events(t.events, left, top, side, cfg_.feature_side));
  }
  const double ref = raw[0].norm();
  const double scale = ref > 0 ? cfg_.template_gain * cfg_.search_norm / ref : 0.0;
  for (auto& r : raw) templates_.push_back(r * scale);
}

Vecd ToyTracker::search_features(std::size_t f, const CropWindow& window) const {
  Vecd v = pool_events(events_.at(f), window.left, window.top, window.side, cfg_.feature_side);
  const double n = v.norm();
  if (n > 0) v *= cfg_.search_norm / n;
  return v;
}

Gridd ToyTracker::score_map(const ToyParams& params, const LoraAdapter<double>* adapter, const Vecd& fused) const {
  if (adapter == nullptr) return toy_forward(params, fused);
  const Vecd base = flatten(toy_forward(params, fused));
  return as_map(lora_apply(base, *adapter, fused), params.map_rows, params.map_cols);
}

std::pair<double, double> ToyTracker::cell_to_image(const ToyParams& params, const CropWindow& window, Index row,
                                                    Index col) const {
  const double x = window.left + (static_cast<double>(col) + 0.5) / static_cast<double>(params.map_cols) * window.side;
  const double y = window.top + (static_cast<double>(row) + 0.5) / static_cast<double>(params.map_rows) * window.side;
  return {x, y};
}

TrackResult ToyTracker::track(const ToyParams& params, const LoraAdapter<double>* adapter) const {
  if (params.in_features() != in_features()) throw Error(Errc::ShapeMismatch, "model/tracker feature size mismatch");
  TrackResult res;
  const std::size_t n = num_frames();
  res.boxes.reserve(n);
  res.boxes.push_back(init_box_);
  res.multipliers.push_back(1.0);
  res.windows.push_back(crop_window(init_box_, {cfg_.search_context, cfg_.feature_side, 1.0}));
  res.search_features.push_back(search_features(0, res.windows.back()));

  AsrState asr;
  double multiplier = 1.0;
  for (std::size_t f = 1; f < n; ++f) {
    const Box& prev = res.boxes.back();
    const CropWindow win = crop_window(prev, {cfg_.search_context * multiplier, cfg_.feature_side, 1.0});
    const Vecd x = search_features(f, win);
    const Gridd map = score_map(params, adapter, x + templates_[0]);
    const Index best = argmax_row_major(map);
    const auto [cx, cy] = cell_to_image(params, win, best / params.map_cols, best % params.map_cols);
    res.boxes.push_back(Box::from_center(cx, cy, init_box_.w, init_box_.h));
    res.multipliers.push_back(multiplier);
    res.windows.push_back(win);
    res.search_features.push_back(x);

    if (cfg_.use_asr) {
      const auto step = asr_step(asr, iou(res.boxes[f], res.boxes[f - 1]), cfg_.asr);
      asr = step.state;
      multiplier = step.multiplier;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

std::vector<TttSample> make_ttt_samples(const ToyTracker& tracker, const ToyParams& params, const TrackResult& base,
                                        std::size_t n_frames) {
  std::vector<TttSample> samples;
  samples.reserve(n_frames);
  for (std::size_t f = 1; f <= n_frames; ++f) {
    const CropWindow& win = base.windows.at(f);
    const Box& label = base.boxes.at(f);
    TttSample s;
    for (const auto& t : tracker.template_features()) s.inputs.push_back(base.search_features[f] + t);
    const double col = (label.cx() - win.left) / win.side * static_cast<double>(params.map_cols) - 0.5;
    const double row = (label.cy() - win.top) / win.side * static_cast<double>(params.map_rows) - 0.5;
    const double sigma = size_adaptive_sigma(label.h / win.side * static_cast<double>(params.map_rows),
                                             label.w / win.side * static_cast<double>(params.map_cols));
    Gridd heat = gaussian_heatmap(col, row, sigma, params.map_rows, params.map_cols);
    s.target = heat / heat.sum();
    samples.push_back(std::move(s));
  }
  return samples;
}

TttObjective ttt_objective(const ToyParams& params, const LoraAdapter<double>& adapter,
                           std::span<const TttSample> samples, bool with_grad) {
  if (samples.empty()) throw Error(Errc::LengthMismatch, "no TTT samples");
  TttObjective obj;
  if (with_grad) {
    obj.grad_a = Gridd::Zero(adapter.a.rows(), adapter.a.cols());
    obj.grad_b = Gridd::Zero(adapter.b.rows(), adapter.b.cols());
  }
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  const double s = adapter.scaling();

  for (const auto& sample : samples) {
    std::vector<Gridd> maps;
    maps.reserve(sample.inputs.size());
    for (const auto& x : sample.inputs) {
      const Vecd base = flatten(toy_forward(params, x));
      maps.push_back(as_map(lora_apply(base, adapter, x), params.map_rows, params.map_cols));
    }

    // Cross-entropy of the full-template map against the pseudo-label.
    const Gridd probs = softmax2d(maps[0]);
    const double shift = maps[0].maxCoeff();
    const double log_z = shift + std::log((maps[0].array() - shift).exp().sum());
    obj.tracking += inv_n * -(sample.target.array() * (maps[0].array() - log_z)).sum();

    std::vector<Gridd> grads(maps.size(), Gridd::Zero(params.map_rows, params.map_cols));
    if (with_grad) grads[0] = (probs - sample.target) * inv_n;
    if (maps.size() >= 2) {
      const auto cons = consistency_loss<double>(maps, ConsistencyInput::Logits);
      obj.consistency += inv_n * cons.value;
      if (with_grad)
        for (std::size_t j = 0; j < maps.size(); ++j) grads[j] += cons.grads[j] * inv_n;
    }
    if (!with_grad) continue;
    for (std::size_t j = 0; j < maps.size(); ++j) {
      const Vecd g = flatten(grads[j]);
      const Vecd& x = sample.inputs[j];
      obj.grad_b.noalias() += s * g * (adapter.a * x).transpose();
      obj.grad_a.noalias() += s * (adapter.b.transpose() * g) * x.transpose();
    }
  }
  return obj;
}

LoraAdapter<double> make_ttt_adapter(const ToyParams& params, const TttConfig& cfg) {
  return make_lora<double>(params.in_features(), params.out_cells(), cfg.lora_rank, cfg.lora_alpha, LoraTarget::Mlp,
                           cfg.seed);
}

TttResult ttt_schedule(const ToyTracker& tracker, const ToyParams& params, LoraAdapter<double> adapter,
                       const TttConfig& cfg) {
  if (cfg.n_frames < 1 || !(cfg.lr > 0) || cfg.weight_decay < 0) {
    throw Error(Errc::InvalidArgument, "TTT needs n_frames >= 1, lr > 0, weight_decay >= 0");
  }
  if (tracker.num_frames() <= cfg.n_frames) {
    throw Error(Errc::VideoTooShort, std::to_string(tracker.num_frames()) + " frames, need more than " +
                                         std::to_string(cfg.n_frames));
  }
  const TrackResult base = tracker.track(params, nullptr);
  const auto samples = make_ttt_samples(tracker, params, base, cfg.n_frames);

  TttResult res;
  res.pseudo_labels.assign(base.boxes.begin() + 1, base.boxes.begin() + 1 + static_cast<std::ptrdiff_t>(cfg.n_frames));
  for (std::size_t epoch = 0; epoch <= cfg.epochs; ++epoch) {
    const bool step = epoch < cfg.epochs;
    const auto obj = ttt_objective(params, adapter, samples, step);
    res.log.push_back({epoch, obj.tracking, obj.consistency, obj.total()});
    if (!step) break;
    // SGD with L2 weight decay folded into the gradient.
    adapter.a -= cfg.lr * (obj.grad_a + cfg.weight_decay * adapter.a);
    adapter.b -= cfg.lr * (obj.grad_b + cfg.weight_decay * adapter.b);
  }
  res.adapter = std::move(adapter);
  return res;
}

std::string format_ttt_log(std::span<const TttLogRow> log) {
  std::string out = "epoch,tracking_loss,consistency_loss,total\n";
  for (const auto& r : log) {
    out += std::to_string(r.epoch) + "," + fixed4(r.tracking) + "," + fixed4(r.consistency) + "," + fixed4(r.total) + "\n";
  }
  return out;
}

std::string format_boxes(std::span<const Box> boxes) {
  std::string out;
  for (const auto& b : boxes) out += fixed4(b.x) + "," + fixed4(b.y) + "," + fixed4(b.w) + "," + fixed4(b.h) + "\n";
  return out;
}

}  // namespace evkd
