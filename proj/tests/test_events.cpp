#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <random>

#include "evkd/events.hpp"
#include "evkd/synthetic.hpp"

using namespace evkd;

namespace {

EventStream one_event(std::uint64_t t, std::uint16_t x, std::uint16_t y, Polarity p) {
  EventStream s;
  s.events.push_back({t, x, y, p});
  return s;
}

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

TEST(EventParse, CsvSingleLine) {
  const auto s = parse_event_stream("100,5,7,1\n", EventFormat::Csv);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.events[0], (EventPoint{100, 5, 7, Polarity::On}));
  EXPECT_EQ(s.geometry, kEventVotGeometry);
}

TEST(EventParse, CsvHeaderAndBlankLines) {
  const auto s = parse_event_stream("t,x,y,p\r\n5,1,1,0\r\n\r\n3,2,2,1\r\n", EventFormat::Csv);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.events[0].t, 3u);  // sorted
  EXPECT_EQ(s.events[1].p, Polarity::Off);
}

TEST(EventParse, EmptyInputs) {
  EXPECT_TRUE(parse_event_stream("", EventFormat::Csv).empty());
  EXPECT_TRUE(parse_event_stream("", EventFormat::Bin).empty());
}

TEST(EventParse, Errors) {
  EXPECT_EQ(code_of([] { parse_event_stream("100,1280,7,1", EventFormat::Csv); }), Errc::OutOfRange);
  EXPECT_EQ(code_of([] { parse_event_stream("100,0,720,1", EventFormat::Csv); }), Errc::OutOfRange);
  EXPECT_EQ(code_of([] { parse_event_stream("100,5,7", EventFormat::Csv); }), Errc::MalformedRecord);
  EXPECT_EQ(code_of([] { parse_event_stream("100,5,7,2", EventFormat::Csv); }), Errc::MalformedRecord);
  EXPECT_EQ(code_of([] { parse_event_stream("1,2,3,1\nx,5,7,1", EventFormat::Csv); }), Errc::MalformedRecord);
  EXPECT_EQ(code_of([] { parse_event_stream("XXXX0000000000000", EventFormat::Bin); }), Errc::MalformedRecord);
}

TEST(EventParse, BinTruncatedRecord) {
  auto bytes = write_event_stream(make_random_stream(10, {64, 48}, 1000, 1), EventFormat::Bin);
  bytes.pop_back();
  EXPECT_EQ(code_of([&] { parse_event_stream(bytes, EventFormat::Bin); }), Errc::MalformedRecord);
}

TEST(EventParse, RoundTripBothFormats) {
  const auto s = make_random_stream(5000, {346, 260}, 77777, 9);
  for (auto fmt : {EventFormat::Csv, EventFormat::Bin}) {
    const auto bytes = write_event_stream(s, fmt);
    EXPECT_EQ(sniff_event_format(bytes), fmt);
    EXPECT_EQ(parse_event_stream(bytes, fmt, s.geometry), s);
  }
}

TEST(EventParse, BinCarriesGeometry) {
  EventStream s = one_event(3, 99, 10, Polarity::On);
  s.geometry = {100, 11};
  const auto back = parse_event_stream(write_event_stream(s, EventFormat::Bin), EventFormat::Bin);
  EXPECT_EQ(back.geometry, s.geometry);
}

TEST(EventParse, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "evkd_events_test";
  std::filesystem::create_directories(dir);
  const auto s = make_random_stream(100, kEventVotGeometry, 1000, 2);
  save_event_file(s, (dir / "a.bin").string(), EventFormat::Bin);
  save_event_file(s, (dir / "a.csv").string(), EventFormat::Csv);
  EXPECT_EQ(load_event_file((dir / "a.bin").string()), s);
  EXPECT_EQ(load_event_file((dir / "a.csv").string()), s);
  EXPECT_EQ(code_of([&] { load_event_file((dir / "missing.bin").string()); }), Errc::Io);
}

// ---------------------------------------------------------------------------

TEST(Stacking, OneEventPerFrame) {
  EventStream s;
  for (std::uint64_t t = 0; t < 499; ++t) s.events.push_back({t, 1, 1, Polarity::On});
  const auto frames = stack_to_frames(s, 499);
  ASSERT_EQ(frames.size(), 499u);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    EXPECT_EQ(frames[k].total(), 1u);
    EXPECT_EQ(frames[k].t_start, k);
    EXPECT_EQ(frames[k].t_end, k + 1);
  }
}

TEST(Stacking, SharedTimestampGoesToFrameZero) {
  EventStream s;
  for (int i = 0; i < 10; ++i) s.events.push_back({42, 0, 0, Polarity::Off});
  const auto counts = stack_counts(s, 5);
  EXPECT_EQ(counts, (std::vector<std::uint64_t>{10, 0, 0, 0, 0}));
}

TEST(Stacking, EmptyStreamThrows) {
  EXPECT_EQ(code_of([] { stack_to_frames(EventStream{}, 4); }), Errc::EmptyStream);
  EXPECT_EQ(code_of([] { stack_to_frames(one_event(0, 0, 0, Polarity::On), 0); }), Errc::InvalidArgument);
}

TEST(Stacking, WindowsMatchFrameIndex) {
  for (std::size_t n : {1u, 2u, 7u, 499u}) {
    const auto s = make_boundary_stream(n, {64, 48}, n);
    const auto windows = frame_windows(s, n);
    const auto span = s.t_max() - s.t_min() + 1;
    EXPECT_EQ(windows.front().t_start, s.t_min());
    EXPECT_EQ(windows.back().t_end, s.t_max() + 1);
    for (std::size_t k = 0; k + 1 < n; ++k) EXPECT_EQ(windows[k].t_end, windows[k + 1].t_start);
    for (const auto& e : s.events) {
      const auto f = frame_index(e.t, s.t_min(), span, n);
      ASSERT_LT(f, n);
      EXPECT_GE(e.t, windows[f].t_start);
      EXPECT_LT(e.t, windows[f].t_end);
    }
  }
}

TEST(Stacking, ConservesCountAndPolarity) {
  const auto s = make_random_stream(20000, {32, 24}, 123457, 5);
  const auto frames = stack_to_frames(s, 17);
  std::uint64_t on = 0, off = 0;
  for (const auto& f : frames) {
    on += f.counts_on.cast<std::uint64_t>().sum();
    off += f.counts_off.cast<std::uint64_t>().sum();
  }
  const auto on_ref = std::count_if(s.events.begin(), s.events.end(), [](auto& e) { return e.p == Polarity::On; });
  EXPECT_EQ(on, static_cast<std::uint64_t>(on_ref));
  EXPECT_EQ(on + off, s.size());
}

// ---------------------------------------------------------------------------

TEST(Voxels, Dimensions) {
  EventStream s;
  s.events.push_back({0, 0, 0, Polarity::On});
  s.events.push_back({9999, 1279, 719, Polarity::On});
  const auto g = build_voxel_grid(s, 16, 16, 2000);
  EXPECT_EQ(g.nx, 80u);
  EXPECT_EQ(g.ny, 45u);
  EXPECT_EQ(g.nt, 5u);
  EXPECT_EQ(g.at(79, 44, 4), 1u);
  EXPECT_EQ(default_voxel_duration(s), 2000u);
}

TEST(Voxels, SingleEvent) {
  const auto g = build_voxel_grid(one_event(77, 0, 0, Polarity::Off), 16, 16, 10);
  EXPECT_EQ(g.nt, 1u);
  EXPECT_EQ(g.at(0, 0, 0), 1u);
  EXPECT_EQ(g.total(), 1u);
}

TEST(Voxels, NonDivisible) {
  const auto s = one_event(0, 0, 0, Polarity::On);
  EXPECT_EQ(code_of([&] { build_voxel_grid(s, 17, 16, 10); }), Errc::NonDivisible);
  EXPECT_EQ(code_of([&] { build_voxel_grid(s, 16, 7, 10); }), Errc::NonDivisible);
  EXPECT_EQ(code_of([&] { build_voxel_grid(s, 16, 16, 0); }), Errc::NonDivisible);
}

TEST(Voxels, MatchesBruteForce) {
  const auto s = make_voxel_edge_stream(8, 6, 250, {64, 48}, 3);
  const auto g = build_voxel_grid(s, 8, 6, 250);
  std::vector<std::uint32_t> ref(g.counts.size(), 0);
  for (const auto& e : s.events) {
    // Linear search for the cell each event falls in.
    for (std::uint32_t it = 0; it < g.nt; ++it)
      for (std::uint32_t iy = 0; iy < g.ny; ++iy)
        for (std::uint32_t ix = 0; ix < g.nx; ++ix) {
          const bool in_t = e.t >= g.t_origin + it * 250 && e.t < g.t_origin + (it + 1) * 250;
          const bool in_y = e.y >= iy * 6 && e.y < (iy + 1) * 6;
          const bool in_x = e.x >= ix * 8 && e.x < (ix + 1) * 8;
          if (in_t && in_y && in_x) ++ref[(static_cast<std::size_t>(it) * g.ny + iy) * g.nx + ix];
        }
  }
  EXPECT_EQ(g.counts, ref);
  EXPECT_EQ(g.total(), s.size());
}

TEST(Voxels, ThreadCountDoesNotChangeResult) {
  const auto s = make_random_stream(300000, kEventVotGeometry, 1'000'000, 11);
  const auto one = build_voxel_grid(s, 32, 24, 50000, 1);
  for (unsigned t : {2u, 3u, 8u}) EXPECT_EQ(build_voxel_grid(s, 32, 24, 50000, t).counts, one.counts);
}

TEST(Voxels, ThreadsFromEnvironment) {
  setenv("EVKD_THREADS", "4", 1);
  EXPECT_EQ(threads_from_env(), 4u);
  setenv("EVKD_THREADS", "junk", 1);
  EXPECT_EQ(threads_from_env(), 1u);
  unsetenv("EVKD_THREADS");
  EXPECT_EQ(threads_from_env(), 1u);
}

// ---------------------------------------------------------------------------

TEST(Render, Colors) {
  EventFrame f;
  f.counts_on = CountGrid::Zero(6, 8);
  f.counts_off = CountGrid::Zero(6, 8);
  auto empty = render_event_image(f);
  for (const auto& px : empty.pixels) EXPECT_EQ(px, kBackgroundColor);

  f.counts_on(4, 3) = 1;
  f.counts_on(1, 1) = 2;
  f.counts_off(1, 1) = 2;
  f.counts_off(5, 7) = 3;
  const auto img = render_event_image(f);
  EXPECT_EQ(img.at(3, 4), kOnColor);
  EXPECT_EQ(img.at(1, 1), kBackgroundColor);
  EXPECT_EQ(img.at(7, 5), kOffColor);
  EXPECT_EQ(img.at(0, 0), kBackgroundColor);

  const auto ppm = encode_ppm(img);
  EXPECT_EQ(ppm.rfind("P6\n8 6\n255\n", 0), 0u);
  EXPECT_EQ(ppm.size(), std::string("P6\n8 6\n255\n").size() + 8 * 6 * 3);
}
