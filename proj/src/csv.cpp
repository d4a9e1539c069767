#include "stst/csv.hpp"

#include <cstdlib>

namespace stst {

namespace {
std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}
}  // namespace

std::vector<CsvRow> read_csv(const std::filesystem::path& path, std::vector<std::string>& header) {
    std::ifstream in(path);
    if (!in) throw ValueError("cannot open file: " + path.string());
    std::vector<CsvRow> rows;
    std::string line;
    std::size_t lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            header = split_fields(line);
            saw_header = true;
            continue;
        }
        rows.push_back({lineno, split_fields(line)});
    }
    if (!saw_header) throw ValueError("empty file: " + path.string());
    return rows;
}

void expect_header(const std::filesystem::path& path, const std::vector<std::string>& header,
                   const std::vector<std::string>& expected) {
    if (header == expected) return;
    std::string want, got;
    for (const auto& f : expected) want += (want.empty() ? "" : ",") + f;
    for (const auto& f : header) got += (got.empty() ? "" : ",") + f;
    throw ValueError(path.string() + ": unexpected header '" + got + "', expected '" + want + "'");
}

AtomicFile::AtomicFile(std::filesystem::path target)
    : target_(std::move(target)), partial_(target_.string() + ".partial") {
    if (target_.has_parent_path()) std::filesystem::create_directories(target_.parent_path());
    out_.open(partial_, std::ios::binary | std::ios::trunc);
    if (!out_) throw ValueError("cannot open file for writing: " + partial_.string());
}

AtomicFile::~AtomicFile() {
    if (!committed_ && out_.is_open()) out_.close();
}

void AtomicFile::write_row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
}

void AtomicFile::commit() {
    out_.close();
    if (!out_) throw ValueError("failed writing file: " + partial_.string());
    std::filesystem::rename(partial_, target_);
    committed_ = true;
}

double parse_double(const std::string& text, const std::string& context) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw ValueError(context + ": not a number: '" + text + "'");
    return v;
}

long parse_long(const std::string& text, const std::string& context) {
    char* end = nullptr;
    const long v = std::strtol(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0')
        throw ValueError(context + ": not an integer: '" + text + "'");
    return v;
}

}  // namespace stst
