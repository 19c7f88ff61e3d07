#include "evkd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace evkd {

namespace {

void sort_stream(EventStream& s) {
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const EventPoint& a, const EventPoint& b) { return a.t < b.t; });
}

EventPoint random_point(std::mt19937_64& rng, SensorGeometry g, std::uint64_t t) {
  std::uniform_int_distribution<std::uint32_t> ux(0, g.width - 1), uy(0, g.height - 1), up(0, 1);
  EventPoint e;
  e.t = t;
  e.x = static_cast<std::uint16_t>(ux(rng));
  e.y = static_cast<std::uint16_t>(uy(rng));
  e.p = up(rng) ? Polarity::On : Polarity::Off;
  return e;
}

}  // namespace

EventStream make_random_stream(std::size_t n, SensorGeometry geometry, std::uint64_t t_span, std::uint64_t seed) {
  if (t_span == 0) throw Error(Errc::InvalidArgument, "t_span must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> ut(0, t_span - 1);
  EventStream s;
  s.geometry = geometry;
  s.events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) s.events.push_back(random_point(rng, geometry, ut(rng)));
  sort_stream(s);
  return s;
}

EventStream make_boundary_stream(std::size_t num_frames, SensorGeometry geometry, std::uint64_t seed) {
  if (num_frames == 0) throw Error(Errc::InvalidArgument, "num_frames must be positive");
  std::mt19937_64 rng(seed);
  const std::uint64_t t0 = 1'000'003;
  // Span chosen coprime-ish with the frame count so boundaries fall on
  // fractional positions.
  const std::uint64_t span = num_frames * 997 + 13;
  EventStream s;
  s.geometry = geometry;
  auto push = [&](std::uint64_t t, std::uint16_t x, std::uint16_t y) {
    s.events.push_back({t, x, y, (rng() & 1) ? Polarity::On : Polarity::Off});
  };
  const auto w1 = static_cast<std::uint16_t>(geometry.width - 1);
  const auto h1 = static_cast<std::uint16_t>(geometry.height - 1);
  push(t0, 0, 0);
  push(t0 + span - 1, w1, h1);
  for (std::size_t k = 1; k < num_frames; ++k) {
    // First timestamp of window k: t0 + ceil(k * span / N).
    const std::uint64_t b = t0 + (k * span + num_frames - 1) / num_frames;
    push(b - 1, w1, 0);
    push(b, 0, h1);
    push(b, w1, h1);
    push(b + 1, 0, 0);
  }
  for (int i = 0; i < 64; ++i) push(t0 + span / 2, 0, 0);
  for (int i = 0; i < 64; ++i) s.events.push_back(random_point(rng, geometry, t0 + span - 1));
  sort_stream(s);
  return s;
}

EventStream make_voxel_edge_stream(std::uint32_t a, std::uint32_t b, std::uint64_t c, SensorGeometry geometry,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EventStream s;
  s.geometry = geometry;
  const std::uint64_t t0 = 500;
  for (std::uint32_t x = 0; x < geometry.width; x += a) {
    for (std::uint32_t y = 0; y < geometry.height; y += b) {
      for (std::uint64_t k = 0; k < 4; ++k) {
        const std::uint64_t t = t0 + k * c;
        const auto p = (rng() & 1) ? Polarity::On : Polarity::Off;
        s.events.push_back({t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), p});
        s.events.push_back({t + c - 1, static_cast<std::uint16_t>(x + a - 1), static_cast<std::uint16_t>(y + b - 1), p});
      }
    }
  }
  // Lands exactly on the final temporal edge.
  s.events.push_back({t0 + 4 * c, 0, 0, Polarity::On});
  sort_stream(s);
  return s;
}

ToyVideo make_synthetic_video(const SyntheticVideoSpec& spec) {
  if (spec.num_frames == 0 || spec.frame_us == 0) throw Error(Errc::InvalidArgument, "empty video spec");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& g = spec.geometry;

  ToyVideo v;
  v.stream.geometry = g;
  v.num_frames = spec.num_frames;
  auto clamp_px = [](double p, std::uint32_t limit) {
    return static_cast<std::uint16_t>(std::clamp(std::floor(p), 0.0, static_cast<double>(limit - 1)));
  };

  for (std::size_t f = 0; f < spec.num_frames; ++f) {
    Box box = spec.start;
    box.x += spec.vx * static_cast<double>(f);
    box.y += spec.vy * static_cast<double>(f);
    v.ground_truth.push_back(box);
    const std::uint64_t base = f * spec.frame_us;
    std::uniform_int_distribution<std::uint64_t> ut(0, spec.frame_us - 1);
    for (std::size_t i = 0; i < spec.target_events; ++i) {
      // Edges of the square fire more often than its interior.
      double u = unit(rng), w = unit(rng);
      if (i % 2 == 0) {
        const int side = static_cast<int>(rng() % 4);
        if (side == 0) u = 0.05 * u;
        if (side == 1) u = 1.0 - 0.05 * u;
        if (side == 2) w = 0.05 * w;
        if (side == 3) w = 1.0 - 0.05 * w;
      }
      EventPoint e;
      e.t = base + ut(rng);
      e.x = clamp_px(box.x + u * box.w, g.width);
      e.y = clamp_px(box.y + w * box.h, g.height);
      e.p = (rng() & 1) ? Polarity::On : Polarity::Off;
      v.stream.events.push_back(e);
    }
    for (std::size_t i = 0; i < spec.noise_events; ++i) v.stream.events.push_back(random_point(rng, g, base + ut(rng)));
  }
  v.stream.events.push_back({0, 0, 0, Polarity::Off});
  v.stream.events.push_back({spec.num_frames * spec.frame_us - 1, 0, 0, Polarity::Off});
  sort_stream(v.stream);
  v.init_box = v.ground_truth.front();
  return v;
}

}  // namespace evkd
