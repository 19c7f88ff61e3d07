#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evkd/core.hpp"

namespace evkd {

enum class Polarity : std::uint8_t { Off = 0, On = 1 };

struct EventPoint {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  Polarity p = Polarity::Off;

  friend bool operator==(const EventPoint&, const EventPoint&) = default;
};

struct SensorGeometry {
  std::uint32_t width = 1280;
  std::uint32_t height = 720;

  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

inline constexpr SensorGeometry kEventVotGeometry{1280, 720};

// Events sorted non-decreasing by timestamp, all inside the geometry.
struct EventStream {
  SensorGeometry geometry;
  std::vector<EventPoint> events;

  bool empty() const noexcept { return events.empty(); }
  std::size_t size() const noexcept { return events.size(); }
  std::uint64_t t_min() const { return events.front().t; }
  std::uint64_t t_max() const { return events.back().t; }

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

enum class EventFormat { Csv, Bin };

/// Parses CSV ("t,x,y,p", optional header line) or the 16-byte-header BIN
/// layout. CSV carries no geometry, so `csv_geometry` supplies it; BIN
/// reads its own. Unsorted input is stably sorted by timestamp.
EventStream parse_event_stream(std::string_view bytes, EventFormat format,
                               SensorGeometry csv_geometry = kEventVotGeometry);

/// Canonical serialization; re-parses to an equal stream.
std::string write_event_stream(const EventStream& stream, EventFormat format);

/// Guesses the format from the BIN magic.
EventFormat sniff_event_format(std::string_view bytes) noexcept;

EventStream load_event_file(const std::string& path,
                            SensorGeometry csv_geometry = kEventVotGeometry);
void save_event_file(const EventStream& stream, const std::string& path, EventFormat format);

// ---------------------------------------------------------------------------
// Fixed-count frame stacking

using CountGrid = Grid<std::uint32_t>;

struct EventFrame {
  std::uint64_t t_start = 0;  // inclusive
  std::uint64_t t_end = 0;    // exclusive
  CountGrid counts_on;
  CountGrid counts_off;

  std::uint64_t total() const;
  /// ON + OFF counts as a real-valued intensity image.
  Gridd intensity() const;
};

struct FrameWindow {
  std::uint64_t t_start = 0;
  std::uint64_t t_end = 0;
};

/// Frame index of timestamp `t` when [t_min, t_max + 1) is split into
/// `num_frames` equal windows.
std::size_t frame_index(std::uint64_t t, std::uint64_t t_min, std::uint64_t span,
                        std::size_t num_frames) noexcept;

/// Window boundaries matching frame_index exactly.
std::vector<FrameWindow> frame_windows(const EventStream& stream, std::size_t num_frames);

/// Per-frame event totals without materializing dense grids.
std::vector<std::uint64_t> stack_counts(const EventStream& stream, std::size_t num_frames);

std::vector<EventFrame> stack_to_frames(const EventStream& stream, std::size_t num_frames);

inline constexpr std::size_t kEventVotFramesPerVideo = 499;

// ---------------------------------------------------------------------------
// Voxel grids

struct VoxelGrid {
  std::uint32_t cell_x = 0;  // a, pixels
  std::uint32_t cell_y = 0;  // b, pixels
  std::uint64_t cell_t = 0;  // c, microseconds
  std::uint64_t t_origin = 0;
  std::uint32_t nx = 0;  // W / a
  std::uint32_t ny = 0;  // H / b
  std::uint32_t nt = 0;  // ceil(T_i / c)
  // Flat counts, index ((it * ny) + iy) * nx + ix.
  std::vector<std::uint32_t> counts;

  std::uint32_t at(std::uint32_t ix, std::uint32_t iy, std::uint32_t it) const {
    return counts[(static_cast<std::size_t>(it) * ny + iy) * nx + ix];
  }
  std::uint64_t total() const;
};

/// Default temporal cell: the span split into five slices.
std::uint64_t default_voxel_duration(const EventStream& stream);

/// `threads` == 0 reads EVKD_THREADS (falls back to 1). The result does not
/// depend on the thread count.
VoxelGrid build_voxel_grid(const EventStream& stream, std::uint32_t a, std::uint32_t b,
                           std::uint64_t c, unsigned threads = 1);

unsigned threads_from_env() noexcept;

// ---------------------------------------------------------------------------
// Rendering

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kBackgroundColor{255, 255, 255};
inline constexpr Rgb kOnColor{0, 0, 255};
inline constexpr Rgb kOffColor{255, 0, 0};

struct RgbImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<Rgb> pixels;  // row-major

  const Rgb& at(std::uint32_t x, std::uint32_t y) const { return pixels[y * width + x]; }
};

/// Dominant polarity wins; ties and empty pixels stay background.
RgbImage render_event_image(const EventFrame& frame);

std::string encode_ppm(const RgbImage& image);

}  // namespace evkd
