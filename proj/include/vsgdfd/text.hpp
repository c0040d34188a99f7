#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

// Small helpers shared by the key=value config readers and the CSV writers.
namespace vsgdfd::text {

std::string_view trim(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

double parse_double(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);

std::vector<double> parse_double_list(std::string_view s, std::string_view what);
std::vector<std::size_t> parse_size_list(std::string_view s, std::string_view what);

std::string join_doubles(const std::vector<double>& values);

template <typename T>
std::string join(const std::vector<T>& values, std::string_view sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    if constexpr (std::is_convertible_v<T, std::string_view>) {
      out += values[i];
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

/// Parses `key=value` lines. Blank lines and lines starting with '#' are
/// skipped. Throws std::invalid_argument on a malformed or duplicated key.
std::map<std::string, std::string> parse_key_values(std::string_view text);

}  // namespace vsgdfd::text
