#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace madrs {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view s);
bool contains(std::string_view haystack, std::string_view needle);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Stateless 64-bit mixer (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);
std::uint64_t hash_string(std::string_view s);

/// Maps a 64-bit hash onto [0, 1).
double unit_interval(std::uint64_t h);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace madrs
