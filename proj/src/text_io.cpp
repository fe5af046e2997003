#include "text_io.hpp"

#include "dlmac/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace dlmac::detail {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_number(std::string_view text, std::size_t line) {
    const auto t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ParseError(line, "not a number: '" + std::string(t) + "'");
    if (!std::isfinite(v)) throw ParseError(line, "non-finite value: '" + std::string(t) + "'");
    return v;
}

long long parse_integer(std::string_view text, std::size_t line) {
    const auto t = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ParseError(line, "not an integer: '" + std::string(t) + "'");
    return v;
}

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

Header parse_header_line(std::string_view line, std::size_t line_no) {
    auto t = trim(line);
    if (t.empty() || t.front() != '#') throw ParseError(line_no, "missing '#' header line");
    t.remove_prefix(1);
    Header h;
    for (auto tok : split(trim(t), ' ')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos || eq == 0) throw ParseError(line_no, "malformed header token '" + std::string(tok) + "'");
        h.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
    }
    return h;
}

const std::string& header_value(const Header& header, std::string_view key, std::size_t line_no) {
    const auto it = header.find(key);
    if (it == header.end()) throw ParseError(line_no, "header is missing '" + std::string(key) + "'");
    return it->second;
}

double header_number(const Header& header, std::string_view key, std::size_t line_no) {
    return parse_number(header_value(header, key, line_no), line_no);
}

Header CsvMatrixReader::header() {
    std::string line;
    if (!std::getline(in_, line)) throw ParseError(1, "empty file");
    line_no_ = 1;
    return parse_header_line(line, line_no_);
}

Matrix CsvMatrixReader::read_rows(std::size_t width) {
    Matrix m(0, width);
    std::string line;
    std::vector<double> row(width);
    while (std::getline(in_, line)) {
        ++line_no_;
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto cells = split(t, ',');
        if (cells.size() != width)
            throw ParseError(line_no_, "expected " + std::to_string(width) + " values, got " + std::to_string(cells.size()));
        for (std::size_t i = 0; i < width; ++i) row[i] = parse_number(cells[i], line_no_);
        m.append_row(row);
    }
    return m;
}

void write_csv_matrix(const std::filesystem::path& path, const std::string& header_line, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    std::string buf = header_line + "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) buf += ',';
            buf += format_number(m(r, c));
        }
        buf += '\n';
        if (buf.size() > (1u << 20)) {
            out << buf;
            buf.clear();
        }
    }
    out << buf;
    if (!out) throw IoError("failed writing " + path.string());
}

} // namespace dlmac::detail
