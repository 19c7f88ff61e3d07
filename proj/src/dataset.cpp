#include "evkd/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "evkd/text_io.hpp"

namespace evkd {

namespace fs = std::filesystem;

bool is_attribute_tag(std::string_view tag) noexcept {
  return std::find(kAttributeTags.begin(), kAttributeTags.end(), tag) != kAttributeTags.end();
}

std::string_view split_name(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

// ---------------------------------------------------------------------------

std::vector<AnnotatedFrame> parse_annotations(std::string_view text) {
  auto lines = lines_of(text);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();

  std::vector<AnnotatedFrame> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split(lines[i], ',');
    auto bad = [&](const std::string& why) {
      return Error(Errc::MalformedLine, "line " + std::to_string(i + 1) + " (" + why + "): \"" +
                                            std::string(lines[i]) + "\"");
    };
    if (fields.size() != 5 && fields.size() != 6) throw bad("expected 5 or 6 fields");
    std::size_t off = 0;
    if (fields.size() == 6) {
      std::uint64_t idx = 0;
      if (!parse_u64(fields[0], idx)) throw bad("frame index");
      if (idx != i) throw bad("frame index out of order");
      off = 1;
    }
    double v[4];
    for (int k = 0; k < 4; ++k)
      if (!parse_double(fields[off + k], v[k])) throw bad("non-numeric box");
    std::uint64_t absent = 0;
    if (!parse_u64(fields[off + 4], absent) || absent > 1) throw bad("absent flag must be 0 or 1");

    AnnotatedFrame f{{v[0], v[1], v[2], v[3]}, absent == 1};
    if (!f.absent && !(f.box.w > 0 && f.box.h > 0)) {
      throw Error(Errc::InvalidBox, "line " + std::to_string(i + 1) + ": non-positive size on a present frame");
    }
    out.push_back(f);
  }
  return out;
}

std::vector<AnnotatedFrame> load_annotations(const std::string& path) { return parse_annotations(read_file(path)); }

std::string format_annotations(const std::vector<AnnotatedFrame>& frames) {
  std::string out;
  for (const auto& f : frames) {
    out += shortest(f.box.x) + "," + shortest(f.box.y) + "," + shortest(f.box.w) + "," + shortest(f.box.h) + "," +
           (f.absent ? "1" : "0") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

SplitSizes DatasetManifest::split_sizes() const {
  SplitSizes s;
  for (const auto& v : videos) {
    switch (v.split) {
      case Split::Train: ++s.train; break;
      case Split::Val: ++s.val; break;
      case Split::Test: ++s.test; break;
    }
  }
  return s;
}

const VideoRecord* DatasetManifest::find(std::string_view id) const {
  for (const auto& v : videos)
    if (v.id == id) return &v;
  return nullptr;
}

std::vector<const VideoRecord*> DatasetManifest::in_split(Split s) const {
  std::vector<const VideoRecord*> out;
  for (const auto& v : videos)
    if (v.split == s) out.push_back(&v);
  return out;
}

namespace {

std::string split_file(const fs::path& root, Split s) { return (root / (std::string(split_name(s)) + ".txt")).string(); }

// id -> remaining comma-separated fields
std::map<std::string, std::vector<std::string>> read_keyed_csv(const fs::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  if (!fs::exists(path)) return out;
  const std::string text = read_file(path.string());
  for (auto line : lines_of(text)) {
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    std::vector<std::string> rest;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto f = trim(fields[i]);
      if (!f.empty()) rest.emplace_back(f);
    }
    out[std::string(trim(fields[0]))] = std::move(rest);
  }
  return out;
}

}  // namespace

DatasetManifest load_manifest(const std::string& root_str) {
  const fs::path root(root_str);
  std::vector<std::string> missing;
  for (auto s : kSplits)
    if (!fs::exists(split_file(root, s))) missing.push_back(split_file(root, s));
  if (!missing.empty()) {
    std::string msg;
    for (const auto& m : missing) msg += (msg.empty() ? "" : ", ") + m;
    throw Error(Errc::MissingSplitFile, msg);
  }

  DatasetManifest man;
  man.root = root_str;
  std::set<std::string> seen;
  std::vector<std::string> dups;
  for (auto s : kSplits) {
    const std::string text = read_file(split_file(root, s));
    for (auto line : lines_of(text)) {
      const auto id = trim(line);
      if (id.empty()) continue;
      if (!seen.emplace(id).second) {
        dups.emplace_back(id);
        continue;
      }
      VideoRecord rec;
      rec.id = std::string(id);
      rec.split = s;
      man.videos.push_back(std::move(rec));
    }
  }
  if (!dups.empty()) {
    std::string msg;
    for (const auto& d : dups) msg += (msg.empty() ? "" : ", ") + d;
    throw Error(Errc::DuplicateVideoId, msg);
  }

  const auto attrs = read_keyed_csv(root / "attributes.csv");
  const auto classes = read_keyed_csv(root / "classes.csv");
  for (auto& v : man.videos) {
    if (auto it = attrs.find(v.id); it != attrs.end()) v.attributes = it->second;
    if (auto it = classes.find(v.id); it != classes.end() && !it->second.empty()) v.class_tag = it->second.front();
    const fs::path gt = root / v.id / "groundtruth.txt";
    if (!fs::exists(gt)) {
      v.annotation_missing = true;
      continue;
    }
    try {
      v.annotations = load_annotations(gt.string());
    } catch (const Error& e) {
      v.annotation_error = e.what();
    }
  }
  return man;
}

void write_manifest(const DatasetManifest& manifest, const std::string& root_str) {
  const fs::path root(root_str);
  fs::create_directories(root);
  for (auto s : kSplits) {
    std::string text;
    for (const auto* v : manifest.in_split(s)) text += v->id + "\n";
    write_file(split_file(root, s), text);
  }
  std::string attrs, classes;
  bool any_class = false;
  for (const auto& v : manifest.videos) {
    attrs += v.id;
    for (const auto& a : v.attributes) attrs += "," + a;
    attrs += "\n";
    classes += v.id + "," + v.class_tag + "\n";
    any_class = any_class || !v.class_tag.empty();
    if (!v.annotation_missing && v.annotation_error.empty()) {
      fs::create_directories(root / v.id);
      write_file((root / v.id / "groundtruth.txt").string(), format_annotations(v.annotations));
    }
  }
  write_file((root / "attributes.csv").string(), attrs);
  if (any_class) write_file((root / "classes.csv").string(), classes);
}

// ---------------------------------------------------------------------------

std::string_view finding_name(FindingKind k) noexcept {
  switch (k) {
    case FindingKind::FrameCountMismatch: return "FrameCountMismatch";
    case FindingKind::BoundsExceeded: return "BoundsExceeded";
    case FindingKind::UnknownAttribute: return "UnknownAttribute";
    case FindingKind::MissingAnnotation: return "MissingAnnotation";
    case FindingKind::MissingSplitFile: return "MissingSplitFile";
    case FindingKind::DuplicateVideoId: return "DuplicateVideoId";
    case FindingKind::SplitCountMismatch: return "SplitCountMismatch";
    case FindingKind::MalformedAnnotation: return "MalformedAnnotation";
  }
  return "?";
}

std::size_t ValidationReport::count(FindingKind k) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(findings.begin(), findings.end(), [k](const Finding& f) { return f.kind == k; }));
}

ValidationReport validate_dataset(const DatasetManifest& manifest, const ValidationOptions& opts) {
  ValidationReport rep;
  const double W = opts.geometry.width;
  const double H = opts.geometry.height;
  for (const auto& v : manifest.videos) {
    for (const auto& tag : v.attributes) {
      if (!is_attribute_tag(tag)) rep.findings.push_back({FindingKind::UnknownAttribute, v.id, std::nullopt, tag});
    }
    if (v.annotation_missing) {
      rep.findings.push_back({FindingKind::MissingAnnotation, v.id, std::nullopt, v.id + "/groundtruth.txt"});
      continue;
    }
    if (!v.annotation_error.empty()) {
      rep.findings.push_back({FindingKind::MalformedAnnotation, v.id, std::nullopt, v.annotation_error});
      continue;
    }
    if (v.frame_count() != opts.expected_frames) {
      rep.findings.push_back({FindingKind::FrameCountMismatch, v.id, std::nullopt,
                              std::to_string(v.frame_count()) + " frames, expected " +
                                  std::to_string(opts.expected_frames)});
    }
    for (std::size_t f = 0; f < v.annotations.size(); ++f) {
      const auto& a = v.annotations[f];
      if (a.absent) continue;
      const Box& b = a.box;
      if (b.x < 0 || b.y < 0 || b.x + b.w > W || b.y + b.h > H) {
        rep.findings.push_back({FindingKind::BoundsExceeded, v.id, f,
                                "box " + shortest(b.x) + "," + shortest(b.y) + "," + shortest(b.w) + "," +
                                    shortest(b.h) + " leaves " + std::to_string(opts.geometry.width) + "x" +
                                    std::to_string(opts.geometry.height)});
      }
    }
  }
  if (opts.expected_splits) {
    const auto got = manifest.split_sizes();
    const auto& want = *opts.expected_splits;
    if (!(got == want)) {
      auto fmt = [](const SplitSizes& s) {
        return std::to_string(s.train) + "/" + std::to_string(s.val) + "/" + std::to_string(s.test) + " (" +
               std::to_string(s.total()) + ")";
      };
      rep.findings.push_back({FindingKind::SplitCountMismatch, "", std::nullopt,
                              "train/val/test " + fmt(got) + ", expected " + fmt(want)});
    }
  }
  return rep;
}

ValidationReport validate_root(const std::string& root, const ValidationOptions& opts) {
  try {
    return validate_dataset(load_manifest(root), opts);
  } catch (const Error& e) {
    ValidationReport rep;
    if (e.code() == Errc::MissingSplitFile) {
      rep.findings.push_back({FindingKind::MissingSplitFile, "", std::nullopt, e.what()});
    } else if (e.code() == Errc::DuplicateVideoId) {
      rep.findings.push_back({FindingKind::DuplicateVideoId, "", std::nullopt, e.what()});
    } else {
      throw;
    }
    return rep;
  }
}

std::string report_to_json(const ValidationReport& report) {
  nlohmann::ordered_json j;
  j["clean"] = report.clean();
  j["findings"] = nlohmann::ordered_json::array();
  std::map<std::string, std::size_t> counts;
  for (const auto& f : report.findings) {
    nlohmann::ordered_json e;
    e["kind"] = std::string(finding_name(f.kind));
    e["video"] = f.video;
    if (f.frame) {
      e["frame"] = *f.frame;
    } else {
      e["frame"] = nullptr;
    }
    e["detail"] = f.detail;
    j["findings"].push_back(std::move(e));
    ++counts[std::string(finding_name(f.kind))];
  }
  j["counts"] = counts;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

ImportSummary import_released_layout(const std::string& src_str, const std::string& dst) {
  const fs::path src(src_str);
  if (!fs::is_directory(src)) throw Error(Errc::Io, src_str + " is not a directory");
  DatasetManifest man;
  ImportSummary sum;
  for (auto s : kSplits) {
    const fs::path dir = src / split_name(s);
    if (!fs::is_directory(dir)) {
      sum.notes.push_back("no " + std::string(split_name(s)) + "/ directory; split left empty");
      continue;
    }
    std::vector<fs::path> videos;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_directory()) videos.push_back(entry.path());
    std::sort(videos.begin(), videos.end());
    for (const auto& vdir : videos) {
      VideoRecord rec;
      rec.id = vdir.filename().string();
      rec.split = s;
      const fs::path gt = vdir / "groundtruth.txt";
      if (!fs::exists(gt)) {
        rec.annotation_missing = true;
        sum.notes.push_back(rec.id + ": no groundtruth.txt");
        man.videos.push_back(std::move(rec));
        continue;
      }
      std::vector<std::uint64_t> absent_flags;
      if (fs::exists(vdir / "absent_label.txt")) {
        for (auto line : lines_of(read_file((vdir / "absent_label.txt").string()))) {
          std::uint64_t a = 0;
          if (parse_u64(line, a)) absent_flags.push_back(a);
        }
      }
      const std::string text = read_file(gt.string());
      std::size_t inferred_absent = 0;
      for (auto line : lines_of(text)) {
        if (trim(line).empty()) continue;
        // Released files may be comma- or whitespace-separated.
        std::string norm(line);
        std::replace(norm.begin(), norm.end(), '\t', ',');
        std::replace(norm.begin(), norm.end(), ' ', ',');
        std::vector<double> v;
        for (auto f : split(norm, ',')) {
          double d = 0;
          if (!trim(f).empty() && parse_double(f, d)) v.push_back(d);
        }
        if (v.size() < 4) throw Error(Errc::MalformedLine, gt.string() + ": \"" + std::string(line) + "\"");
        AnnotatedFrame fr{{v[0], v[1], v[2], v[3]}, false};
        const std::size_t idx = rec.annotations.size();
        if (idx < absent_flags.size()) {
          fr.absent = absent_flags[idx] != 0;
        }
        if (!fr.absent && !(fr.box.w > 0 && fr.box.h > 0)) {
          fr.absent = true;
          ++inferred_absent;
        }
        rec.annotations.push_back(fr);
      }
      if (inferred_absent > 0) {
        sum.notes.push_back(rec.id + ": " + std::to_string(inferred_absent) + " zero-size frames marked absent");
      }
      man.videos.push_back(std::move(rec));
    }
  }
  sum.videos = man.videos.size();
  if (sum.videos > 0) sum.notes.push_back("attribute tags and classes are not part of the released layout; left empty");
  write_manifest(man, dst);
  return sum;
}

}  // namespace evkd
