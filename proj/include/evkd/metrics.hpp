#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evkd/dataset.hpp"
#include "evkd/geometry.hpp"

// One-pass evaluation: success (IoU AUC), precision at 20 px, and
// normalized precision (AUC over [0, 0.5]). Absent frames are skipped.

namespace evkd {

struct TrackRun {
  std::string video_id;
  std::vector<Box> predicted;
  std::vector<Box> ground_truth;
  std::vector<bool> absent;
  std::vector<std::string> attributes;
};

inline constexpr std::size_t kSuccessPoints = 21;     // IoU 0, 0.05, ..., 1
inline constexpr std::size_t kPrecisionPoints = 51;   // 0..50 px
inline constexpr std::size_t kNormPrecisionPoints = 101;  // 0, 0.005, ..., 0.5
inline constexpr std::size_t kPrecisionReportPx = 20;

double success_threshold(std::size_t i) noexcept;
double precision_threshold(std::size_t i) noexcept;
double norm_precision_threshold(std::size_t i) noexcept;

struct MetricReport {
  double sr = 0;   // x100
  double pr = 0;   // x100
  double npr = 0;  // x100
  std::vector<double> success;
  std::vector<double> precision;
  std::vector<double> norm_precision;
};

/// success(t) = share of present frames with IoU > t.
std::vector<double> success_curve(const TrackRun& run);
/// precision(t) = share of present frames with center error <= t px.
std::vector<double> precision_curve(const TrackRun& run);
/// Same over normalized center error.
std::vector<double> normalized_precision_curve(const TrackRun& run);

/// Trapezoid area under the normalized-precision curve over its [0, 0.5]
/// grid, divided by 0.5.
double normalized_precision_auc(std::span<const double> curve);

MetricReport evaluate_run(const TrackRun& run);

/// Per-video metrics averaged with equal weight; runs are reduced in
/// video-id order.
MetricReport aggregate(std::span<const TrackRun> runs);

struct AttributeRow {
  std::string tag;
  std::size_t videos = 0;
  std::optional<MetricReport> report;  // empty when no run carries the tag
};

/// One row per tag of the 14-tag vocabulary, in vocabulary order.
std::vector<AttributeRow> attribute_breakdown(std::span<const TrackRun> runs);

/// "x,y,w,h" per line (comma, tab or space separated).
std::vector<Box> parse_result_file(std::string_view text);

/// Pairs `<results_dir>/<id>.txt` with the manifest's annotations.
std::vector<TrackRun> load_runs(const DatasetManifest& manifest, const std::string& results_dir,
                                std::optional<Split> split);

std::string report_csv(const MetricReport& report);
std::string curves_csv(const MetricReport& report);
std::string attributes_csv(std::span<const AttributeRow> rows);
std::string curves_svg(const MetricReport& report);

}  // namespace evkd
