#pragma once

// Internal helpers for the CSV-with-header file formats.

#include "dlmac/matrix.hpp"

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dlmac::detail {

using Header = std::map<std::string, std::string, std::less<>>;

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Parses a finite decimal number; throws ParseError tagged with `line`.
double parse_number(std::string_view text, std::size_t line);
long long parse_integer(std::string_view text, std::size_t line);

/// Shortest representation that round-trips exactly.
std::string format_number(double v);

/// Parses `# key=value key=value ...`.
Header parse_header_line(std::string_view line, std::size_t line_no);
double header_number(const Header& header, std::string_view key, std::size_t line_no);
const std::string& header_value(const Header& header, std::string_view key, std::size_t line_no);

class CsvMatrixReader {
public:
    explicit CsvMatrixReader(std::istream& in) : in_(in) {}

    /// Reads the first line; it must be a `#` header.
    Header header();

    /// Reads all remaining non-blank lines as rows of exactly `width` numbers.
    Matrix read_rows(std::size_t width);

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

void write_csv_matrix(const std::filesystem::path& path, const std::string& header_line, const Matrix& m);

} // namespace dlmac::detail
