#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evkd/events.hpp"
#include "evkd/geometry.hpp"

// EventVOT-style dataset layout:
//
//   <root>/train.txt, val.txt, test.txt   one video id per line
//   <root>/attributes.csv                 video_id,TAG,TAG,...
//   <root>/classes.csv                    video_id,class   (optional)
//   <root>/<video_id>/groundtruth.txt     x,y,w,h,absent per frame

namespace evkd {

inline constexpr std::array<std::string_view, 14> kAttributeTags = {
    "CM", "MOC", "HOC", "FOC", "DEF", "LI", "OV", "SV", "BC", "FM", "NMO", "BOM", "SIO", "ST"};

bool is_attribute_tag(std::string_view tag) noexcept;

enum class Split { Train, Val, Test };

inline constexpr std::array<Split, 3> kSplits = {Split::Train, Split::Val, Split::Test};

std::string_view split_name(Split s) noexcept;

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
  std::size_t total() const noexcept { return train + val + test; }
  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

inline constexpr SplitSizes kEventVotSplits{841, 18, 282};

struct AnnotatedFrame {
  Box box;
  bool absent = false;
  friend bool operator==(const AnnotatedFrame&, const AnnotatedFrame&) = default;
};

/// Lines "x,y,w,h,absent" or "frame,x,y,w,h,absent"; a leading frame index
/// must match the line order. Non-positive sizes are only allowed on absent
/// frames.
std::vector<AnnotatedFrame> parse_annotations(std::string_view text);
std::vector<AnnotatedFrame> load_annotations(const std::string& path);
std::string format_annotations(const std::vector<AnnotatedFrame>& frames);

struct VideoRecord {
  std::string id;
  Split split = Split::Train;
  std::string class_tag;
  std::vector<std::string> attributes;
  std::vector<AnnotatedFrame> annotations;
  bool annotation_missing = false;
  std::string annotation_error;  // parse failure, if any
  SensorGeometry geometry = kEventVotGeometry;

  std::size_t frame_count() const noexcept { return annotations.size(); }
  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

struct DatasetManifest {
  std::string root;
  std::vector<VideoRecord> videos;  // split order, then file order

  SplitSizes split_sizes() const;
  const VideoRecord* find(std::string_view id) const;
  std::vector<const VideoRecord*> in_split(Split s) const;
};

/// Reads the layout above. Every missing split file is listed in one
/// MissingSplitFile error; every repeated id in one DuplicateVideoId error.
/// Missing or malformed annotation files do not throw; they are flagged on
/// the record so validation can report every problem at once.
DatasetManifest load_manifest(const std::string& root);

/// Writes the manifest back in the canonical layout.
void write_manifest(const DatasetManifest& manifest, const std::string& root);

// ---------------------------------------------------------------------------

enum class FindingKind {
  FrameCountMismatch,
  BoundsExceeded,
  UnknownAttribute,
  MissingAnnotation,
  MissingSplitFile,
  DuplicateVideoId,
  SplitCountMismatch,
  MalformedAnnotation,
};

std::string_view finding_name(FindingKind k) noexcept;

struct Finding {
  FindingKind kind;
  std::string video;              // empty for dataset-level findings
  std::optional<std::size_t> frame;
  std::string detail;

  friend bool operator==(const Finding&, const Finding&) = default;
};

struct ValidationOptions {
  std::size_t expected_frames = kEventVotFramesPerVideo;
  SensorGeometry geometry = kEventVotGeometry;
  /// Enforce the full-release split sizes.
  std::optional<SplitSizes> expected_splits;
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool clean() const noexcept { return findings.empty(); }
  std::size_t count(FindingKind k) const noexcept;
};

ValidationReport validate_dataset(const DatasetManifest& manifest, const ValidationOptions& opts = {});

/// Loads and validates, turning load-time errors (missing split files,
/// duplicate ids, malformed annotations) into findings.
ValidationReport validate_root(const std::string& root, const ValidationOptions& opts = {});

std::string report_to_json(const ValidationReport& report);

// ---------------------------------------------------------------------------

struct ImportSummary {
  std::size_t videos = 0;
  std::vector<std::string> notes;  // information the canonical layout could not carry
};

/// Maps a released layout (<src>/<split>/<video>/groundtruth.txt with
/// "x,y,w,h" lines, optional absent_label.txt of 0/1 per frame) onto the
/// canonical layout under `dst`.
ImportSummary import_released_layout(const std::string& src, const std::string& dst);

}  // namespace evkd
