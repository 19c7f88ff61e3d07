#include "evkd/metrics.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "evkd/text_io.hpp"

namespace evkd {

namespace fs = std::filesystem;

double success_threshold(std::size_t i) noexcept { return static_cast<double>(i) / 20.0; }
double precision_threshold(std::size_t i) noexcept { return static_cast<double>(i); }
double norm_precision_threshold(std::size_t i) noexcept { return static_cast<double>(i) / 200.0; }

namespace {

void check_run(const TrackRun& run) {
  if (run.ground_truth.empty()) throw Error(Errc::EmptyRun, "video " + run.video_id + " has no frames");
  if (run.predicted.size() != run.ground_truth.size() ||
      (!run.absent.empty() && run.absent.size() != run.ground_truth.size())) {
    throw Error(Errc::LengthMismatch, "video " + run.video_id + ": " + std::to_string(run.predicted.size()) +
                                          " predictions for " + std::to_string(run.ground_truth.size()) + " frames");
  }
}

bool is_absent(const TrackRun& run, std::size_t f) { return !run.absent.empty() && run.absent[f]; }

// Per-frame score for every present frame.
template <typename Fn>
std::vector<double> present_scores(const TrackRun& run, Fn score) {
  check_run(run);
  std::vector<double> out;
  out.reserve(run.ground_truth.size());
  for (std::size_t f = 0; f < run.ground_truth.size(); ++f) {
    if (!is_absent(run, f)) out.push_back(score(run.predicted[f], run.ground_truth[f]));
  }
  if (out.empty()) throw Error(Errc::AllAbsent, "video " + run.video_id + " has no present frames");
  return out;
}

template <typename Cmp>
std::vector<double> threshold_curve(const std::vector<double>& scores, std::size_t points, double (*thr)(std::size_t),
                                    Cmp pass) {
  std::vector<double> curve(points);
  const auto n = static_cast<double>(scores.size());
  for (std::size_t i = 0; i < points; ++i) {
    const double t = thr(i);
    const auto hits = std::count_if(scores.begin(), scores.end(), [&](double s) { return pass(s, t); });
    curve[i] = static_cast<double>(hits) / n;
  }
  return curve;
}

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

std::vector<double> success_curve(const TrackRun& run) {
  const auto ious = present_scores(run, [](const Box& p, const Box& g) { return iou(p, g); });
  return threshold_curve(ious, kSuccessPoints, success_threshold, [](double s, double t) { return s > t; });
}

std::vector<double> precision_curve(const TrackRun& run) {
  const auto errs = present_scores(run, [](const Box& p, const Box& g) { return center_error(p, g); });
  return threshold_curve(errs, kPrecisionPoints, precision_threshold, [](double s, double t) { return s <= t; });
}

std::vector<double> normalized_precision_curve(const TrackRun& run) {
  const auto errs = present_scores(run, [](const Box& p, const Box& g) { return normalized_center_error(p, g); });
  return threshold_curve(errs, kNormPrecisionPoints, norm_precision_threshold,
                         [](double s, double t) { return s <= t; });
}

double normalized_precision_auc(std::span<const double> curve) {
  double area = 0;
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    area += 0.5 * (curve[i] + curve[i + 1]) * (norm_precision_threshold(i + 1) - norm_precision_threshold(i));
  }
  return area / norm_precision_threshold(curve.size() - 1);
}

MetricReport evaluate_run(const TrackRun& run) {
  MetricReport r;
  r.success = success_curve(run);
  r.precision = precision_curve(run);
  r.norm_precision = normalized_precision_curve(run);
  r.sr = mean(r.success) * 100.0;
  r.pr = r.precision[kPrecisionReportPx] * 100.0;
  r.npr = normalized_precision_auc(r.norm_precision) * 100.0;
  return r;
}

MetricReport aggregate(std::span<const TrackRun> runs) {
  if (runs.empty()) throw Error(Errc::EmptyRun, "no runs to aggregate");
  std::vector<const TrackRun*> order;
  for (const auto& r : runs) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const TrackRun* a, const TrackRun* b) { return a->video_id < b->video_id; });

  MetricReport acc;
  acc.success.assign(kSuccessPoints, 0.0);
  acc.precision.assign(kPrecisionPoints, 0.0);
  acc.norm_precision.assign(kNormPrecisionPoints, 0.0);
  for (const auto* run : order) {
    const auto r = evaluate_run(*run);
    acc.sr += r.sr;
    acc.pr += r.pr;
    acc.npr += r.npr;
    for (std::size_t i = 0; i < kSuccessPoints; ++i) acc.success[i] += r.success[i];
    for (std::size_t i = 0; i < kPrecisionPoints; ++i) acc.precision[i] += r.precision[i];
    for (std::size_t i = 0; i < kNormPrecisionPoints; ++i) acc.norm_precision[i] += r.norm_precision[i];
  }
  const auto n = static_cast<double>(order.size());
  acc.sr /= n;
  acc.pr /= n;
  acc.npr /= n;
  for (auto& v : acc.success) v /= n;
  for (auto& v : acc.precision) v /= n;
  for (auto& v : acc.norm_precision) v /= n;
  return acc;
}

std::vector<AttributeRow> attribute_breakdown(std::span<const TrackRun> runs) {
  std::vector<AttributeRow> rows;
  for (auto tag : kAttributeTags) {
    std::vector<TrackRun> subset;
    for (const auto& r : runs)
      if (std::find(r.attributes.begin(), r.attributes.end(), tag) != r.attributes.end()) subset.push_back(r);
    AttributeRow row{std::string(tag), subset.size(), std::nullopt};
    if (!subset.empty()) row.report = aggregate(subset);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::vector<Box> parse_result_file(std::string_view text) {
  auto lines = lines_of(text);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  std::vector<Box> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string norm(lines[i]);
    std::replace(norm.begin(), norm.end(), '\t', ',');
    std::replace(norm.begin(), norm.end(), ' ', ',');
    std::vector<double> v;
    for (auto f : split(norm, ',')) {
      if (trim(f).empty()) continue;
      double d = 0;
      if (!parse_double(f, d)) {
        throw Error(Errc::MalformedLine, "line " + std::to_string(i + 1) + ": \"" + std::string(lines[i]) + "\"");
      }
      v.push_back(d);
    }
    if (v.size() != 4) {
      throw Error(Errc::MalformedLine, "line " + std::to_string(i + 1) + ": expected x,y,w,h");
    }
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  return out;
}

std::vector<TrackRun> load_runs(const DatasetManifest& manifest, const std::string& results_dir,
                                std::optional<Split> split) {
  std::vector<TrackRun> runs;
  std::vector<std::string> missing;
  for (const auto& v : manifest.videos) {
    if (split && v.split != *split) continue;
    if (v.annotation_missing || !v.annotation_error.empty()) {
      throw Error(Errc::Io, "video " + v.id + " has no usable ground truth");
    }
    const fs::path file = fs::path(results_dir) / (v.id + ".txt");
    if (!fs::exists(file)) {
      missing.push_back(file.string());
      continue;
    }
    TrackRun run;
    run.video_id = v.id;
    run.predicted = parse_result_file(read_file(file.string()));
    for (const auto& a : v.annotations) {
      run.ground_truth.push_back(a.box);
      run.absent.push_back(a.absent);
    }
    run.attributes = v.attributes;
    if (run.predicted.size() != run.ground_truth.size()) {
      throw Error(Errc::LengthMismatch, v.id + ": " + std::to_string(run.predicted.size()) + " results for " +
                                            std::to_string(run.ground_truth.size()) + " frames");
    }
    runs.push_back(std::move(run));
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " result files missing:";
    for (const auto& m : missing) msg += " " + m;
    throw Error(Errc::Io, msg);
  }
  return runs;
}

// ---------------------------------------------------------------------------

std::string report_csv(const MetricReport& r) {
  return "metric,value\nSR," + fixed4(r.sr) + "\nPR," + fixed4(r.pr) + "\nNPR," + fixed4(r.npr) + "\n";
}

std::string curves_csv(const MetricReport& r) {
  std::string out = "curve,threshold,value\n";
  for (std::size_t i = 0; i < r.success.size(); ++i)
    out += "success," + fixed4(success_threshold(i)) + "," + fixed4(r.success[i]) + "\n";
  for (std::size_t i = 0; i < r.precision.size(); ++i)
    out += "precision," + fixed4(precision_threshold(i)) + "," + fixed4(r.precision[i]) + "\n";
  for (std::size_t i = 0; i < r.norm_precision.size(); ++i)
    out += "norm_precision," + fixed4(norm_precision_threshold(i)) + "," + fixed4(r.norm_precision[i]) + "\n";
  return out;
}

std::string attributes_csv(std::span<const AttributeRow> rows) {
  std::string out = "attribute,videos,SR,PR,NPR\n";
  for (const auto& row : rows) {
    out += row.tag + "," + std::to_string(row.videos);
    if (row.report) {
      out += "," + fixed4(row.report->sr) + "," + fixed4(row.report->pr) + "," + fixed4(row.report->npr) + "\n";
    } else {
      out += ",absent,absent,absent\n";
    }
  }
  return out;
}

std::string curves_svg(const MetricReport& r) {
  constexpr int kPanelW = 300, kPanelH = 220, kPad = 30;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(3 * kPanelW) +
                    "\" height=\"" + std::to_string(kPanelH) + "\">\n";
  auto panel = [&](int idx, const std::string& title, const std::vector<double>& ys, double x_max,
                   double (*thr)(std::size_t), double score) {
    const int ox = idx * kPanelW + kPad;
    const int oy = kPanelH - kPad;
    const double w = kPanelW - 2 * kPad;
    const double h = kPanelH - 2 * kPad;
    svg += "<rect x=\"" + std::to_string(ox) + "\" y=\"" + std::to_string(kPad) + "\" width=\"" +
           std::to_string(static_cast<int>(w)) + "\" height=\"" + std::to_string(static_cast<int>(h)) +
           "\" fill=\"none\" stroke=\"#888\"/>\n";
    svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      svg += fixed4(ox + thr(i) / x_max * w) + "," + fixed4(oy - ys[i] * h) + " ";
    }
    svg += "\"/>\n<text x=\"" + std::to_string(ox) + "\" y=\"" + std::to_string(kPad - 8) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + title + " [" + fixed4(score) + "]</text>\n";
  };
  panel(0, "Success (SR)", r.success, 1.0, success_threshold, r.sr);
  panel(1, "Precision (PR@20)", r.precision, 50.0, precision_threshold, r.pr);
  panel(2, "Normalized precision (NPR)", r.norm_precision, 0.5, norm_precision_threshold, r.npr);
  svg += "</svg>\n";
  return svg;
}

}  // namespace evkd
