#include <gtest/gtest.h>

#include <json.hpp>

#include "evkd/dataset.hpp"
#include "support/fixtures.hpp"

using namespace evkd;
namespace fs = std::filesystem;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no evkd::Error thrown";
  return Errc::Io;
}

}  // namespace

TEST(Annotations, ParseForms) {
  const auto a = parse_annotations("0,100,200,50,40,0\n1,0,0,0,0,1\n");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].box, (Box{100, 200, 50, 40}));
  EXPECT_FALSE(a[0].absent);
  EXPECT_TRUE(a[1].absent);
  const auto b = parse_annotations("1.5,2,3,4,0\r\n");
  EXPECT_EQ(b[0].box, (Box{1.5, 2, 3, 4}));
}

TEST(Annotations, Errors) {
  EXPECT_EQ(code_of([] { parse_annotations("100,200,-5,40,0"); }), Errc::InvalidBox);
  EXPECT_EQ(code_of([] { parse_annotations("1,2,3"); }), Errc::MalformedLine);
  EXPECT_EQ(code_of([] { parse_annotations("5,1,2,3,4,0"); }), Errc::MalformedLine);  // frame index != line
  EXPECT_EQ(code_of([] { parse_annotations("1,2,3,4,2"); }), Errc::MalformedLine);
}

TEST(Annotations, FormatRoundTrip) {
  const auto frames = fixture::drifting_track(50);
  EXPECT_EQ(parse_annotations(format_annotations(frames)), frames);
}

TEST(Manifest, LoadTwoVideos) {
  const auto root = fixture::write_two_video("ds_two");
  const auto m = load_manifest(root.string());
  ASSERT_EQ(m.videos.size(), 2u);
  EXPECT_EQ(m.split_sizes(), (SplitSizes{1, 0, 1}));
  EXPECT_EQ(m.find("vid_b")->split, Split::Test);
  EXPECT_EQ(m.find("vid_a")->attributes, (std::vector<std::string>{"FM", "SV"}));
  EXPECT_EQ(m.find("vid_a")->frame_count(), 499u);
  EXPECT_EQ(m.find("nope"), nullptr);
  EXPECT_EQ(m.in_split(Split::Val).size(), 0u);
}

TEST(Manifest, RoundTrip) {
  const auto root = fixture::write_two_video("ds_rt_a");
  const auto m = load_manifest(root.string());
  const auto copy = fixture::fresh_dir("ds_rt_b");
  write_manifest(m, copy.string());
  auto back = load_manifest(copy.string());
  back.root = m.root;
  EXPECT_EQ(back.videos, m.videos);
}

TEST(Manifest, DuplicateAcrossSplits) {
  const auto root = fixture::write_two_video("ds_dup");
  fixture::append_line(root / "val.txt", "vid_a");
  EXPECT_EQ(code_of([&] { load_manifest(root.string()); }), Errc::DuplicateVideoId);
}

TEST(Manifest, MissingSplitFilesListedTogether) {
  const auto root = fixture::write_two_video("ds_missing");
  fs::remove(root / "val.txt");
  fs::remove(root / "test.txt");
  try {
    load_manifest(root.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingSplitFile);
    EXPECT_NE(std::string(e.what()).find("val.txt"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("test.txt"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------

TEST(Validate, CleanFixture) {
  const auto root = fixture::write_two_video("val_clean");
  const auto rep = validate_root(root.string());
  EXPECT_TRUE(rep.clean()) << report_to_json(rep);
}

TEST(Validate, BoundsExceeded) {
  auto m = fixture::two_video_manifest();
  m.videos[1].annotations[7].box = {1250, 10, 40, 20};
  const auto rep = validate_dataset(m);
  ASSERT_EQ(rep.findings.size(), 1u);
  EXPECT_EQ(rep.findings[0].kind, FindingKind::BoundsExceeded);
  EXPECT_EQ(rep.findings[0].video, "vid_b");
  EXPECT_EQ(rep.findings[0].frame, 7u);
}

TEST(Validate, AbsentFramesAreNotBoundsChecked) {
  auto m = fixture::two_video_manifest();
  m.videos[0].annotations[3] = {{5000, 5000, 0, 0}, true};
  EXPECT_TRUE(validate_dataset(m).clean());
}

TEST(Validate, FrameCountMismatch) {
  auto m = fixture::two_video_manifest();
  m.videos[0].annotations.pop_back();
  const auto rep = validate_dataset(m);
  ASSERT_EQ(rep.count(FindingKind::FrameCountMismatch), 1u);
  EXPECT_EQ(rep.findings[0].video, "vid_a");
}

TEST(Validate, UnknownAttribute) {
  auto m = fixture::two_video_manifest();
  m.videos[0].attributes.push_back("XYZ");
  const auto rep = validate_dataset(m);
  ASSERT_EQ(rep.count(FindingKind::UnknownAttribute), 1u);
  EXPECT_EQ(rep.findings[0].detail, "XYZ");
}

TEST(Validate, DuplicateIdBecomesFinding) {
  const auto root = fixture::write_two_video("val_dup");
  fixture::append_line(root / "test.txt", "vid_a");
  const auto rep = validate_root(root.string());
  EXPECT_EQ(rep.count(FindingKind::DuplicateVideoId), 1u);
}

TEST(Validate, MissingAndMalformedAnnotations) {
  const auto root = fixture::write_two_video("val_ann");
  fs::remove(root / "vid_a" / "groundtruth.txt");
  write_file((root / "vid_b" / "groundtruth.txt").string(), "1,2,3\n");
  const auto rep = validate_root(root.string());
  EXPECT_EQ(rep.count(FindingKind::MissingAnnotation), 1u);
  EXPECT_EQ(rep.count(FindingKind::MalformedAnnotation), 1u);
}

TEST(Validate, FullSplitArithmetic) {
  DatasetManifest m;
  const SplitSizes want = kEventVotSplits;
  EXPECT_EQ(want.total(), 1141u);
  const auto track = fixture::drifting_track(499);
  auto add = [&](Split s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      VideoRecord r;
      r.id = std::string(split_name(s)) + "_" + std::to_string(i);
      r.split = s;
      r.annotations = track;
      m.videos.push_back(std::move(r));
    }
  };
  add(Split::Train, 841);
  add(Split::Val, 18);
  add(Split::Test, 282);
  ValidationOptions opts;
  opts.expected_splits = kEventVotSplits;
  EXPECT_TRUE(validate_dataset(m, opts).clean());
  m.videos.pop_back();
  const auto rep = validate_dataset(m, opts);
  ASSERT_EQ(rep.count(FindingKind::SplitCountMismatch), 1u);
  EXPECT_NE(rep.findings[0].detail.find("841/18/281 (1140)"), std::string::npos);
}

TEST(Validate, JsonReport) {
  auto m = fixture::two_video_manifest();
  m.videos[0].attributes.push_back("BAD");
  const auto j = nlohmann::json::parse(report_to_json(validate_dataset(m)));
  EXPECT_FALSE(j["clean"].get<bool>());
  EXPECT_EQ(j["findings"][0]["kind"], "UnknownAttribute");
  EXPECT_EQ(j["counts"]["UnknownAttribute"], 1);
}

// ---------------------------------------------------------------------------

TEST(Import, ReleasedLayout) {
  const auto src = fixture::fresh_dir("import_src");
  fs::create_directories(src / "train" / "v1");
  fs::create_directories(src / "test" / "v2");
  write_file((src / "train" / "v1" / "groundtruth.txt").string(), "1,2,3,4\n5 6 7 8\n0,0,0,0\n");
  write_file((src / "test" / "v2" / "groundtruth.txt").string(), "1,1,2,2\n1,1,2,2\n");
  write_file((src / "test" / "v2" / "absent_label.txt").string(), "0\n1\n");
  const auto dst = fixture::fresh_dir("import_dst");
  const auto sum = import_released_layout(src.string(), dst.string());
  EXPECT_EQ(sum.videos, 2u);
  const auto m = load_manifest(dst.string());
  EXPECT_EQ(m.split_sizes(), (SplitSizes{1, 0, 1}));
  const auto* v1 = m.find("v1");
  ASSERT_NE(v1, nullptr);
  EXPECT_EQ(v1->annotations[1].box, (Box{5, 6, 7, 8}));
  EXPECT_TRUE(v1->annotations[2].absent);
  EXPECT_TRUE(m.find("v2")->annotations[1].absent);
  EXPECT_FALSE(sum.notes.empty());
}
