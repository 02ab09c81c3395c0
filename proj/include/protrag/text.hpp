#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace protrag::text {

std::string_view trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Lowercased runs of ASCII alphanumerics; everything else separates words.
std::vector<std::string> words(std::string_view s);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// One step of the splitmix64 generator; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

/// Fixed-point rendering with `decimals` digits after the point.
std::string format_fixed(double v, int decimals);

}  // namespace protrag::text
