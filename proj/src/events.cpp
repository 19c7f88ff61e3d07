#include "evkd/events.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "evkd/text_io.hpp"

namespace evkd {
namespace {

constexpr char kMagic[4] = {'E', 'V', 'K', 'D'};
constexpr std::size_t kHeaderSize = 16;
constexpr std::size_t kRecordSize = 13;

template <typename T>
T read_le(const char* p) noexcept {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

template <typename T>
void append_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

void check_bounds(const EventPoint& e, const SensorGeometry& g, std::size_t record) {
  if (e.x >= g.width || e.y >= g.height) {
    throw Error(Errc::OutOfRange, "event " + std::to_string(record) + " at (" +
                                      std::to_string(e.x) + "," + std::to_string(e.y) +
                                      ") outside " + std::to_string(g.width) + "x" +
                                      std::to_string(g.height));
  }
}

void sort_if_needed(std::vector<EventPoint>& events) {
  auto by_time = [](const EventPoint& a, const EventPoint& b) { return a.t < b.t; };
  if (!std::is_sorted(events.begin(), events.end(), by_time)) {
    std::stable_sort(events.begin(), events.end(), by_time);
  }
}

// Parses one unsigned field terminated by `sep` (or end of line for the last
// field). Advances `p`.
bool take_field(const char*& p, const char* end, char sep, std::uint64_t& out) {
  while (p < end && (*p == ' ' || *p == '\t')) ++p;
  auto [ptr, ec] = std::from_chars(p, end, out);
  if (ec != std::errc{} || ptr == p) return false;
  p = ptr;
  while (p < end && (*p == ' ' || *p == '\t')) ++p;
  if (sep == '\n') return true;
  if (p >= end || *p != sep) return false;
  ++p;
  return true;
}

EventStream parse_csv(std::string_view bytes, SensorGeometry geometry) {
  if (geometry.width == 0 || geometry.height == 0 || geometry.width > 0xFFFF ||
      geometry.height > 0xFFFF) {
    throw Error(Errc::InvalidArgument, "sensor geometry must be in [1, 65535]");
  }
  EventStream stream{geometry, {}};
  // Rough reservation: ~16 bytes per line.
  stream.events.reserve(bytes.size() / 16 + 1);

  const char* p = bytes.data();
  const char* const end = p + bytes.size();
  std::size_t line_no = 0;
  while (p < end) {
    const char* nl = static_cast<const char*>(std::memchr(p, '\n', static_cast<std::size_t>(end - p)));
    const char* line_end = nl ? nl : end;
    const char* stop = line_end;
    if (stop > p && stop[-1] == '\r') --stop;
    ++line_no;

    std::string_view line(p, static_cast<std::size_t>(stop - p));
    p = nl ? nl + 1 : end;
    if (trim(line).empty()) continue;
    if (line_no == 1 && trim(line) == "t,x,y,p") continue;

    const char* q = line.data();
    const char* qe = q + line.size();
    std::uint64_t t, x, y, pol;
    if (!take_field(q, qe, ',', t) || !take_field(q, qe, ',', x) || !take_field(q, qe, ',', y) ||
        !take_field(q, qe, '\n', pol) || q != qe || pol > 1) {
      throw Error(Errc::MalformedRecord,
                  "line " + std::to_string(line_no) + ": \"" + std::string(line) + "\"");
    }
    if (x >= geometry.width || y >= geometry.height) {
      throw Error(Errc::OutOfRange, "line " + std::to_string(line_no) + ": (" + std::to_string(x) +
                                        "," + std::to_string(y) + ") outside " +
                                        std::to_string(geometry.width) + "x" +
                                        std::to_string(geometry.height));
    }
    stream.events.push_back({t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                             pol ? Polarity::On : Polarity::Off});
  }
  sort_if_needed(stream.events);
  return stream;
}

EventStream parse_bin(std::string_view bytes) {
  if (bytes.empty()) return EventStream{};
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(Errc::MalformedRecord, "missing EVKD header");
  }
  EventStream stream;
  stream.geometry.width = read_le<std::uint16_t>(bytes.data() + 4);
  stream.geometry.height = read_le<std::uint16_t>(bytes.data() + 6);
  const auto count = read_le<std::uint64_t>(bytes.data() + 8);
  if (stream.geometry.width == 0 || stream.geometry.height == 0) {
    throw Error(Errc::MalformedRecord, "zero sensor geometry in header");
  }
  const std::size_t payload = bytes.size() - kHeaderSize;
  if (payload % kRecordSize != 0 || payload / kRecordSize != count) {
    throw Error(Errc::MalformedRecord, "header declares " + std::to_string(count) +
                                           " events, payload holds " +
                                           std::to_string(payload / kRecordSize) + " (+" +
                                           std::to_string(payload % kRecordSize) + " bytes)");
  }
  stream.events.resize(count);
  const char* rec = bytes.data() + kHeaderSize;
  for (std::size_t i = 0; i < count; ++i, rec += kRecordSize) {
    EventPoint& e = stream.events[i];
    e.t = read_le<std::uint64_t>(rec);
    e.x = read_le<std::uint16_t>(rec + 8);
    e.y = read_le<std::uint16_t>(rec + 10);
    const auto pol = static_cast<unsigned char>(rec[12]);
    if (pol > 1) throw Error(Errc::MalformedRecord, "record " + std::to_string(i) + ": polarity byte " + std::to_string(pol));
    e.p = pol ? Polarity::On : Polarity::Off;
    check_bounds(e, stream.geometry, i);
  }
  sort_if_needed(stream.events);
  return stream;
}

}  // namespace

EventStream parse_event_stream(std::string_view bytes, EventFormat format,
                               SensorGeometry csv_geometry) {
  return format == EventFormat::Csv ? parse_csv(bytes, csv_geometry) : parse_bin(bytes);
}

std::string write_event_stream(const EventStream& stream, EventFormat format) {
  std::string out;
  if (format == EventFormat::Csv) {
    out.reserve(8 + stream.size() * 20);
    out += "t,x,y,p\n";
    char num[24];
    auto put = [&](auto v, char sep) {
      const auto r = std::to_chars(num, num + sizeof num, v);
      out.append(num, r.ptr);
      out += sep;
    };
    for (const auto& e : stream.events) {
      put(e.t, ',');
      put(e.x, ',');
      put(e.y, ',');
      out += e.p == Polarity::On ? '1' : '0';
      out += '\n';
    }
    return out;
  }
  if (stream.geometry.width > 0xFFFF || stream.geometry.height > 0xFFFF) {
    throw Error(Errc::OutOfRange, "geometry does not fit the 16-bit BIN header");
  }
  out.reserve(kHeaderSize + stream.size() * kRecordSize);
  out.append(kMagic, 4);
  append_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.geometry.width));
  append_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.geometry.height));
  append_le<std::uint64_t>(out, stream.size());
  for (const auto& e : stream.events) {
    append_le<std::uint64_t>(out, e.t);
    append_le<std::uint16_t>(out, e.x);
    append_le<std::uint16_t>(out, e.y);
    out.push_back(e.p == Polarity::On ? 1 : 0);
  }
  return out;
}

EventFormat sniff_event_format(std::string_view bytes) noexcept {
  return bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0 ? EventFormat::Bin
                                                                         : EventFormat::Csv;
}

EventStream load_event_file(const std::string& path, SensorGeometry csv_geometry) {
  const std::string bytes = read_file(path);
  return parse_event_stream(bytes, sniff_event_format(bytes), csv_geometry);
}

void save_event_file(const EventStream& stream, const std::string& path, EventFormat format) {
  write_file(path, write_event_stream(stream, format));
}

// ---------------------------------------------------------------------------

std::uint64_t EventFrame::total() const {
  std::uint64_t sum = 0;
  for (Index i = 0; i < counts_on.size(); ++i) sum += counts_on.data()[i];
  for (Index i = 0; i < counts_off.size(); ++i) sum += counts_off.data()[i];
  return sum;
}

Gridd EventFrame::intensity() const {
  return counts_on.cast<double>() + counts_off.cast<double>();
}

std::size_t frame_index(std::uint64_t t, std::uint64_t t_min, std::uint64_t span,
                        std::size_t num_frames) noexcept {
  const auto offset = static_cast<unsigned __int128>(t - t_min);
  return static_cast<std::size_t>(offset * num_frames / span);
}

namespace {

void check_stack_args(const EventStream& stream, std::size_t num_frames) {
  if (stream.empty()) throw Error(Errc::EmptyStream, "no events to define a time span");
  if (num_frames == 0) throw Error(Errc::InvalidArgument, "num_frames must be >= 1");
}

std::uint64_t span_of(const EventStream& stream) { return stream.t_max() - stream.t_min() + 1; }

}  // namespace

std::vector<FrameWindow> frame_windows(const EventStream& stream, std::size_t num_frames) {
  check_stack_args(stream, num_frames);
  const auto t0 = stream.t_min();
  const auto span = static_cast<unsigned __int128>(span_of(stream));
  // Window k holds offsets d with k <= d*N/S < k+1, i.e. d in [ceil(kS/N), ceil((k+1)S/N)).
  auto boundary = [&](std::size_t k) {
    const unsigned __int128 num = span * k;
    return t0 + static_cast<std::uint64_t>((num + num_frames - 1) / num_frames);
  };
  std::vector<FrameWindow> windows(num_frames);
  for (std::size_t k = 0; k < num_frames; ++k) windows[k] = {boundary(k), boundary(k + 1)};
  return windows;
}

std::vector<std::uint64_t> stack_counts(const EventStream& stream, std::size_t num_frames) {
  check_stack_args(stream, num_frames);
  std::vector<std::uint64_t> counts(num_frames, 0);
  const auto t0 = stream.t_min();
  const auto span = span_of(stream);
  for (const auto& e : stream.events) ++counts[frame_index(e.t, t0, span, num_frames)];
  return counts;
}

std::vector<EventFrame> stack_to_frames(const EventStream& stream, std::size_t num_frames) {
  const auto windows = frame_windows(stream, num_frames);
  const auto h = static_cast<Index>(stream.geometry.height);
  const auto w = static_cast<Index>(stream.geometry.width);
  std::vector<EventFrame> frames(num_frames);
  for (std::size_t k = 0; k < num_frames; ++k) {
    frames[k].t_start = windows[k].t_start;
    frames[k].t_end = windows[k].t_end;
    frames[k].counts_on = CountGrid::Zero(h, w);
    frames[k].counts_off = CountGrid::Zero(h, w);
  }
  const auto t0 = stream.t_min();
  const auto span = span_of(stream);
  for (const auto& e : stream.events) {
    auto& f = frames[frame_index(e.t, t0, span, num_frames)];
    auto& grid = e.p == Polarity::On ? f.counts_on : f.counts_off;
    ++grid(e.y, e.x);
  }
  return frames;
}

// ---------------------------------------------------------------------------

std::uint64_t VoxelGrid::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

std::uint64_t default_voxel_duration(const EventStream& stream) {
  if (stream.empty()) throw Error(Errc::EmptyStream, "no events to define a time span");
  const auto span = span_of(stream);
  return std::max<std::uint64_t>(1, (span + 4) / 5);
}

unsigned threads_from_env() noexcept {
  if (const char* env = std::getenv("EVKD_THREADS")) {
    std::uint64_t n = 0;
    if (parse_u64(env, n) && n > 0) return static_cast<unsigned>(std::min<std::uint64_t>(n, 256));
  }
  return 1;
}

VoxelGrid build_voxel_grid(const EventStream& stream, std::uint32_t a, std::uint32_t b,
                           std::uint64_t c, unsigned threads) {
  if (stream.empty()) throw Error(Errc::EmptyStream, "no events to voxelize");
  const auto& g = stream.geometry;
  if (a == 0 || b == 0 || c == 0) throw Error(Errc::NonDivisible, "cell sizes must be positive");
  if (g.width % a != 0) {
    throw Error(Errc::NonDivisible, std::to_string(a) + " does not divide W=" + std::to_string(g.width));
  }
  if (g.height % b != 0) {
    throw Error(Errc::NonDivisible, std::to_string(b) + " does not divide H=" + std::to_string(g.height));
  }

  VoxelGrid grid;
  grid.cell_x = a;
  grid.cell_y = b;
  grid.cell_t = c;
  grid.t_origin = stream.t_min();
  grid.nx = g.width / a;
  grid.ny = g.height / b;
  const auto span = span_of(stream);
  // Span padded up to the next multiple of c.
  grid.nt = static_cast<std::uint32_t>(span / c + (span % c != 0 ? 1 : 0));
  const std::size_t cells = static_cast<std::size_t>(grid.nx) * grid.ny * grid.nt;
  grid.counts.assign(cells, 0);

  auto accumulate = [&](std::size_t begin, std::size_t end, std::vector<std::uint32_t>& out) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& e = stream.events[i];
      const std::size_t it = (e.t - grid.t_origin) / c;
      const std::size_t idx = (it * grid.ny + e.y / b) * grid.nx + e.x / a;
      ++out[idx];
    }
  };

  if (threads == 0) threads = threads_from_env();
  const std::size_t n = stream.size();
  if (threads <= 1 || n < 65536) {
    accumulate(0, n, grid.counts);
    return grid;
  }

  // Contiguous chunks of a time-sorted stream are time windows; integer
  // merging makes the result independent of the split.
  std::vector<std::vector<std::uint32_t>> partial(threads, std::vector<std::uint32_t>(cells, 0));
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t begin = n * w / threads;
      const std::size_t end = n * (w + 1) / threads;
      workers.emplace_back([&, w, begin, end] { accumulate(begin, end, partial[w]); });
    }
  }
  for (const auto& part : partial) {
    for (std::size_t i = 0; i < cells; ++i) grid.counts[i] += part[i];
  }
  return grid;
}

// ---------------------------------------------------------------------------

RgbImage render_event_image(const EventFrame& frame) {
  RgbImage img;
  img.height = static_cast<std::uint32_t>(frame.counts_on.rows());
  img.width = static_cast<std::uint32_t>(frame.counts_on.cols());
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, kBackgroundColor);
  for (std::uint32_t y = 0; y < img.height; ++y) {
    for (std::uint32_t x = 0; x < img.width; ++x) {
      const auto on = frame.counts_on(y, x);
      const auto off = frame.counts_off(y, x);
      if (on > off) {
        img.pixels[y * img.width + x] = kOnColor;
      } else if (off > on) {
        img.pixels[y * img.width + x] = kOffColor;
      }
    }
  }
  return img;
}

std::string encode_ppm(const RgbImage& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.pixels.size() * 3);
  for (const auto& px : image.pixels) {
    out.push_back(static_cast<char>(px.r));
    out.push_back(static_cast<char>(px.g));
    out.push_back(static_cast<char>(px.b));
  }
  return out;
}

}  // namespace evkd
