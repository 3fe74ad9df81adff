#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tb::csv {

// RFC 4180-style table: first row is the header. Quoted fields may contain
// commas, doubled quotes and newlines. Trailing CR is stripped.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view name) const;
    // Throws SchemaError "<source>: missing column '<name>'".
    std::size_t require(std::string_view name, std::string_view source) const;
};

Table parse(std::string_view text, std::string_view source);
Table read(const std::filesystem::path& path);

std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);
// Fixed notation with the given number of decimals.
std::string format_fixed(double v, int decimals);

}  // namespace tb::csv
