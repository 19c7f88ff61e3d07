#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evkd/events.hpp"
#include "evkd/geometry.hpp"
#include "evkd/inference.hpp"
#include "evkd/toy_model.hpp"

// A desk-scale event tracker built from the toy linear model: events are
// stacked into frames, the search region is cropped around the previous
// result and pooled to a small feature grid, and the score-map argmax
// becomes the new box center. Used to exercise the adaptive search region
// and test-time tuning end to end.

namespace evkd {

struct ToyVideo {
  EventStream stream;
  std::size_t num_frames = 0;
  Box init_box;
  std::vector<Box> ground_truth;  // optional; num_frames entries when present
};

/// Reads `events.bin` (or `events.csv`) and `groundtruth.txt` from `dir`.
/// The annotation line count fixes the frame count; line 1 is the init box.
ToyVideo load_video_fixture(const std::string& dir, SensorGeometry csv_geometry = kEventVotGeometry);
void save_video_fixture(const ToyVideo& video, const std::string& dir);

struct ToyTrackerConfig {
  Index feature_side = 8;  // pooled crop side; in_features = side^2
  double search_context = 4.0;
  double template_context = 2.0;
  double search_norm = 24.0;   // L2 norm of pooled search features
  double template_gain = 0.25;  // template features relative to search_norm
  std::size_t n_templates = 3;
  std::uint64_t template_seed = 7;
  bool use_asr = true;
  AsrParams asr;
};

struct TrackResult {
  std::vector<Box> boxes;          // one per frame; boxes[0] is the init box
  std::vector<double> multipliers;  // search expansion used at each frame
  std::vector<CropWindow> windows;  // search window used at each frame
  std::vector<Vecd> search_features;
};

/// Structured base weights: each score cell reads a Gaussian-weighted
/// average of the features around its center, scaled by `gain`, plus
/// N(0, noise) perturbation.
ToyParams make_tracking_params(std::uint64_t seed, const ToyTrackerConfig& cfg = {}, Index map_side = 16,
                               double gain = 1.0, double noise = 0.005);

class ToyTracker {
 public:
  ToyTracker(const ToyVideo& video, ToyTrackerConfig cfg = {});

  const ToyTrackerConfig& config() const noexcept { return cfg_; }
  std::size_t num_frames() const noexcept { return events_.size(); }
  Index in_features() const noexcept { return cfg_.feature_side * cfg_.feature_side; }
  const Box& init_box() const noexcept { return init_box_; }

  /// Template features for each sparsity level (index 0 is the full window).
  const std::vector<Vecd>& template_features() const noexcept { return templates_; }

  /// Pooled, normalized search features for a window over frame `f`.
  Vecd search_features(std::size_t f, const CropWindow& window) const;

  /// Score-map logits for a fused input, with the adapter if given.
  Gridd score_map(const ToyParams& params, const LoraAdapter<double>* adapter, const Vecd& fused) const;

  /// Map-cell center -> image coordinates within `window`.
  std::pair<double, double> cell_to_image(const ToyParams& params, const CropWindow& window, Index row,
                                          Index col) const;

  /// One-pass tracking from frame 1 on.
  TrackResult track(const ToyParams& params, const LoraAdapter<double>* adapter = nullptr) const;

 private:
  ToyTrackerConfig cfg_;
  Box init_box_;
  std::vector<std::vector<EventPoint>> events_;
  std::vector<Vecd> templates_;
};

// ---------------------------------------------------------------------------
// Test-time tuning

struct TttConfig {
  std::size_t n_frames = 5;
  std::size_t epochs = 5;
  double lr = 0.01;
  double weight_decay = 0.1;
  Index lora_rank = 16;
  double lora_alpha = 32;
  std::uint64_t seed = 0;  // adapter initialization
};

struct TttSample {
  std::vector<Vecd> inputs;  // fused input per template
  Gridd target;              // normalized Gaussian around the pseudo-label
};

struct TttObjective {
  double tracking = 0;
  double consistency = 0;
  double total() const noexcept { return tracking + consistency; }
  Gridd grad_a;
  Gridd grad_b;
};

struct TttLogRow {
  std::size_t epoch = 0;
  double tracking = 0;
  double consistency = 0;
  double total = 0;
};

struct TttResult {
  LoraAdapter<double> adapter;
  std::vector<TttLogRow> log;  // epoch 0 is the untuned objective
  std::vector<Box> pseudo_labels;
};

/// Pseudo-labelled samples from base tracking on frames 1..n_frames.
std::vector<TttSample> make_ttt_samples(const ToyTracker& tracker, const ToyParams& params,
                                        const TrackResult& base, std::size_t n_frames);

/// Mean over samples of cross-entropy against the pseudo-label heatmap plus
/// the template consistency loss, with gradients w.r.t. the adapter factors.
TttObjective ttt_objective(const ToyParams& params, const LoraAdapter<double>& adapter,
                           std::span<const TttSample> samples, bool with_grad = true);

LoraAdapter<double> make_ttt_adapter(const ToyParams& params, const TttConfig& cfg);

/// Tunes only the adapter; `params` is never modified.
TttResult ttt_schedule(const ToyTracker& tracker, const ToyParams& params, LoraAdapter<double> adapter,
                       const TttConfig& cfg);

std::string format_ttt_log(std::span<const TttLogRow> log);
std::string format_boxes(std::span<const Box> boxes);

}  // namespace evkd
