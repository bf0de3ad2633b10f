#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace platoon::csv {

/// Shortest form that round-trips (%.17g); "nan" for NaN.
std::string format_exact(double v);
/// Fixed six decimals.
std::string format_fixed(double v);

/// strtod over the whole field; throws ParseError naming `where` otherwise.
double parse_double(std::string_view field, std::string_view where);
int parse_int(std::string_view field, std::string_view where);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws ParseError when absent.
    [[nodiscard]] std::size_t column(std::string_view name) const;
};

/// Plain comma-separated text without quoting. Fields are trimmed of spaces.
/// An empty file yields an empty header. Throws ConfigError / ParseError.
Table read(const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories. Throws ConfigError.
void write_file(const std::filesystem::path& path, std::string_view text);

}  // namespace platoon::csv
