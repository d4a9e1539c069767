#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stst/common.hpp"

namespace stst {

struct CsvRow {
    std::size_t line = 0;  // 1-based line number in the file
    std::vector<std::string> fields;
};

// Reads a whole comma-separated file. `header` receives the first line's
// fields; remaining lines land in the returned rows. Blank lines are
// skipped. No quoting support; none of our schemas need it.
std::vector<CsvRow> read_csv(const std::filesystem::path& path, std::vector<std::string>& header);

// Verifies an exact header and throws a ValueError naming the file otherwise.
void expect_header(const std::filesystem::path& path, const std::vector<std::string>& header,
                   const std::vector<std::string>& expected);

// Writes a file through a ".partial" sibling, renamed into place on
// commit(). An uncommitted file keeps the suffix, so failed commands never
// leave a clean-looking artifact behind.
class AtomicFile {
  public:
    explicit AtomicFile(std::filesystem::path target);
    ~AtomicFile();

    std::ofstream& out() { return out_; }
    void write_row(const std::vector<std::string>& fields);
    void commit();

  private:
    std::filesystem::path target_;
    std::filesystem::path partial_;
    std::ofstream out_;
    bool committed_ = false;
};

double parse_double(const std::string& text, const std::string& context);
long parse_long(const std::string& text, const std::string& context);

}  // namespace stst
