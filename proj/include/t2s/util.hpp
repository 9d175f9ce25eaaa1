#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace t2s {

inline constexpr const char* kToolVersion = "0.1.0";

namespace util {

std::string lower_ascii(std::string_view s);

// Collapses whitespace runs to single spaces and trims both ends.
std::string collapse_whitespace(std::string_view s);

// Replaces newlines and tabs with spaces, then collapses whitespace.
std::string single_line(std::string_view s);

std::string trim(std::string_view s);
std::string rtrim(std::string_view s);

bool starts_with_word_ci(std::string_view text, std::string_view word);

// FNV-1a over bytes; stable across platforms, used for config hashes.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Rounds half away from zero to one decimal and formats as e.g. "58.9".
std::string format_pct1(double v);
double round1(double v);

// {tool_version, config_hash, rng_seed} header embedded in artifacts.
nlohmann::json artifact_meta(const std::string& config_hash, std::uint64_t rng_seed);

} // namespace util
} // namespace t2s
