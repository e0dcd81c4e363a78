#include "pupilkit/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace pupilkit::io {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string header_line(const FileHeader& h) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "# pupilkit v1 config=%016llx seed=%llu",
                  static_cast<unsigned long long>(h.config_hash),
                  static_cast<unsigned long long>(h.seed));
    return buf;
}

int CsvTable::column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw DataError("csv-format", path + ": missing column '" + std::string(name) + "'");
    return static_cast<int>(it - header.begin());
}

double CsvTable::num(std::size_t row, int col) const {
    const std::string& s = rows[row][static_cast<std::size_t>(col)];
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("csv-format",
                        path + ": '" + s + "' is not a number (row " + std::to_string(row + 1) + ")");
    }
}

const std::string& CsvTable::str(std::size_t row, int col) const {
    return rows[row][static_cast<std::size_t>(col)];
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing-input", "cannot open " + path);
    CsvTable table;
    table.path = path;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_commas(line);
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size())
            throw DataError("csv-format", path + ": row with " + std::to_string(cells.size()) +
                                              " cells, expected " + std::to_string(table.header.size()));
        table.rows.push_back(std::move(cells));
    }
    if (!have_header) throw DataError("csv-format", path + ": no header row");
    return table;
}

CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected) {
    CsvTable table = read_csv(path);
    if (table.header != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        throw DataError("csv-format", path + ": header mismatch, expected '" + want + "'");
    }
    return table;
}

CsvWriter::CsvWriter(const std::string& path, const FileHeader& meta,
                     const std::vector<std::string>& header)
    : path_(path), out_(path), n_columns_(header.size()) {
    if (!out_) throw DataError("output-error", "cannot write " + path);
    out_ << header_line(meta) << '\n';
    for (std::size_t i = 0; i < header.size(); ++i)
        out_ << (i ? "," : "") << header[i];
    out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != n_columns_)
        throw DataError("output-error", path_ + ": row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i)
        out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
    if (!out_) throw DataError("output-error", "write failed on " + path_);
}

std::string cell(double v) { return format_double(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(std::size_t v) { return std::to_string(v); }

std::string read_file_comment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing-input", "cannot open " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') return line;
        break;
    }
    return {};
}

}  // namespace pupilkit::io
