#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace evkd {

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

/// Fixed decimal, four fractional digits; the format of every number the
/// CLI prints.
std::string fixed4(double value);

/// Shortest representation that parses back to the identical double.
std::string shortest(double value);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s) noexcept;

/// Splits into lines, dropping a trailing '\r' from each.
std::vector<std::string_view> lines_of(std::string_view text);

bool parse_u64(std::string_view s, std::uint64_t& out) noexcept;
bool parse_double(std::string_view s, double& out) noexcept;

}  // namespace evkd
