#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace qv::csv {

struct Table {
    std::string source;  // file name used in error messages
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based physical line where each row starts

    /// Column index by exact header name, or npos.
    [[nodiscard]] std::size_t column(std::string_view name) const noexcept;
};

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

/// RFC 4180 reader: quoted fields, doubled quotes, embedded separators and
/// line breaks. Throws ParseError with the offending line number on
/// unterminated quotes or ragged rows.
[[nodiscard]] Table read(std::istream& in, const std::string& source);
[[nodiscard]] Table read_file(const std::string& path);

/// Quotes a field when it contains a separator, quote or line break.
[[nodiscard]] std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest round-trip decimal for a double; empty string for missing.
[[nodiscard]] std::string format_number(double v);

}  // namespace qv::csv
