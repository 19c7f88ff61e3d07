#include "evkd/text_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evkd/core.hpp"

namespace evkd {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::EmptyStream: return "EmptyStream";
    case Errc::NonDivisible: return "NonDivisible";
    case Errc::DegenerateBox: return "DegenerateBox";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonMultiple: return "NonMultiple";
    case Errc::BadSigma: return "BadSigma";
    case Errc::BadTemperature: return "BadTemperature";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyWindow: return "EmptyWindow";
    case Errc::VideoTooShort: return "VideoTooShort";
    case Errc::EmptyRun: return "EmptyRun";
    case Errc::AllAbsent: return "AllAbsent";
    case Errc::MissingSplitFile: return "MissingSplitFile";
    case Errc::DuplicateVideoId: return "DuplicateVideoId";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::InvalidBox: return "InvalidBox";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "write failed for " + path);
}

std::string fixed4(double value) {
  if (value == 0.0) value = 0.0;  // no "-0.0000"
  char buf[64];
  int n = std::snprintf(buf, sizeof buf, "%.4f", value);
  std::string s(buf, static_cast<std::size_t>(n));
  if (s == "-0.0000") s = "0.0000";
  return s;
}

std::string shortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    auto end = pos == std::string_view::npos ? text.size() : pos;
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_u64(std::string_view s, std::uint64_t& out) noexcept {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) noexcept {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace evkd
