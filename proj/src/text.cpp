#include "vsgdfd/text.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace vsgdfd::text {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

double parse_double(std::string_view s, std::string_view what) {
  const std::string str(trim(s));
  if (str.empty()) throw std::invalid_argument(std::string(what) + ": empty value");
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (end != str.c_str() + str.size()) {
    throw std::invalid_argument(std::string(what) + ": not a number: '" + str + "'");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  const auto t = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    throw std::invalid_argument(std::string(what) + ": not a non-negative integer: '" +
                                std::string(t) + "'");
  }
  return v;
}

std::vector<double> parse_double_list(std::string_view s, std::string_view what) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_double(part, what));
  return out;
}

std::vector<std::size_t> parse_size_list(std::string_view s, std::string_view what) {
  std::vector<std::size_t> out;
  for (const auto& part : split(s, ',')) out.push_back(static_cast<std::size_t>(parse_u64(part, what)));
  return out;
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key=value");
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw std::invalid_argument("line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
      throw std::invalid_argument("duplicate key '" + key + "'");
    }
  }
  return kv;
}

}  // namespace vsgdfd::text
