#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace evtap::io {

/// Reads a whole file; throws IoError naming the path on failure.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Splits on `sep` with no quoting support; empty fields are preserved.
std::vector<std::string_view> split(std::string_view line, char sep = ',');

std::string_view trim(std::string_view s);

/// Splits a text buffer into lines (LF, tolerating a trailing CR). A final
/// empty line after the last LF is dropped.
std::vector<std::string_view> lines(std::string_view text);

long long parse_int(std::string_view field, std::size_t line);
double parse_double(std::string_view field, std::size_t line);

/// Fixed-point rendering with `decimals` digits, "-0.000000" normalized to
/// "0.000000" so equal values always print identically.
std::string fixed(double v, int decimals = 6);

}  // namespace evtap::io
