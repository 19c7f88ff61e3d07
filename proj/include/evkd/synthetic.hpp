#pragma once

#include <cstdint>

#include "evkd/events.hpp"
#include "evkd/toy_tracker.hpp"

// Deterministic synthetic event data for tests, fixtures and benchmarks.

namespace evkd {

/// `n` uniform events over [0, t_span) on the sensor, sorted by time.
EventStream make_random_stream(std::size_t n, SensorGeometry geometry, std::uint64_t t_span, std::uint64_t seed);

/// Events placed on and next to every frame-window boundary, at the sensor
/// corners, with long runs of equal timestamps and a span that does not
/// divide evenly by `num_frames`.
EventStream make_boundary_stream(std::size_t num_frames, SensorGeometry geometry, std::uint64_t seed);

/// Events that sit exactly on voxel cell edges in x, y and t.
EventStream make_voxel_edge_stream(std::uint32_t a, std::uint32_t b, std::uint64_t c, SensorGeometry geometry,
                                   std::uint64_t seed);

struct SyntheticVideoSpec {
  SensorGeometry geometry{160, 120};
  std::size_t num_frames = 30;
  std::uint64_t frame_us = 1000;
  Box start{68, 48, 24, 24};
  double vx = 0;  // px per frame
  double vy = 0;
  std::size_t target_events = 240;  // per frame
  std::size_t noise_events = 40;    // per frame, whole sensor
  std::uint64_t seed = 1;
};

/// A textured square moving at constant velocity over background noise.
/// Anchor events at t = 0 and t = F * frame_us - 1 make every stacked
/// frame cover exactly one frame period.
ToyVideo make_synthetic_video(const SyntheticVideoSpec& spec = {});

}  // namespace evkd
