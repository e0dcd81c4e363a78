#pragma once

#include "pupilkit/common.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace pupilkit::io {

/// Metadata stamped as a comment line at the top of every emitted file:
/// `# pupilkit v1 config=<hex> seed=<n>`.
struct FileHeader {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

std::string header_line(const FileHeader& h);

/// Comma-separated table with `#` comment lines and one header row.
struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(std::string_view name) const;  // throws DataError when absent
    double num(std::size_t row, int col) const;
    const std::string& str(std::size_t row, int col) const;
};

CsvTable read_csv(const std::string& path);
/// Same, but verifies the header matches `expected` exactly.
CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const FileHeader& meta,
              const std::vector<std::string>& header);

    void row(const std::vector<std::string>& cells);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
    std::size_t n_columns_;
};

std::string cell(double v);
std::string cell(int v);
std::string cell(std::size_t v);

/// First comment line of a pupilkit file, or empty when none.
std::string read_file_comment(const std::string& path);

}  // namespace pupilkit::io
