#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evalguard::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column position by name, or nullopt.
    std::optional<std::size_t> find(std::string_view name) const;
};

// RFC 4180 style: comma separated, double-quoted fields may contain commas,
// quotes ("") and newlines. A header row is required. Throws InputError on
// unreadable files, an empty file, or rows whose width differs from the header.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text);

// Strict decimal parse ('.' separator, no thousands separators, no trailing
// junk). Returns nullopt on failure or non-finite values.
std::optional<double> parse_double(std::string_view field);

// Shortest round-trip representation.
std::string format_double(double value);

std::string escape(std::string_view field);

} // namespace evalguard::csv
