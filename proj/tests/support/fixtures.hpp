#pragma once

// Small on-disk datasets for the dataset, metrics and CLI tests.

#include <filesystem>
#include <string>
#include <vector>

#include "evkd/dataset.hpp"
#include "evkd/text_io.hpp"

namespace fixture {

namespace fs = std::filesystem;

inline fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("evkd_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Box drifting one pixel per frame from (100, 80), size 40x30.
inline std::vector<evkd::AnnotatedFrame> drifting_track(std::size_t frames) {
  std::vector<evkd::AnnotatedFrame> out;
  for (std::size_t f = 0; f < frames; ++f) {
    const double d = static_cast<double>(f % 200);
    out.push_back({{100 + d, 80 + d * 0.5, 40, 30}, f % 97 == 13});
  }
  return out;
}

// Two videos: vid_a in train tagged FM, SV; vid_b in test tagged OV.
inline evkd::DatasetManifest two_video_manifest(std::size_t frames = 499) {
  evkd::DatasetManifest m;
  evkd::VideoRecord a;
  a.id = "vid_a";
  a.split = evkd::Split::Train;
  a.attributes = {"FM", "SV"};
  a.annotations = drifting_track(frames);
  evkd::VideoRecord b = a;
  b.id = "vid_b";
  b.split = evkd::Split::Test;
  b.attributes = {"OV"};
  m.videos = {a, b};
  return m;
}

inline fs::path write_two_video(const std::string& name, std::size_t frames = 499) {
  const auto dir = fresh_dir(name);
  evkd::write_manifest(two_video_manifest(frames), dir.string());
  return dir;
}

inline void append_line(const fs::path& file, const std::string& line) {
  std::string text = fs::exists(file) ? evkd::read_file(file.string()) : "";
  evkd::write_file(file.string(), text + line + "\n");
}

inline std::string boxes_text(const std::vector<evkd::AnnotatedFrame>& frames) {
  std::string out;
  for (const auto& f : frames)
    out += evkd::shortest(f.box.x) + "," + evkd::shortest(f.box.y) + "," + evkd::shortest(f.box.w) + "," +
           evkd::shortest(f.box.h) + "\n";
  return out;
}

}  // namespace fixture
