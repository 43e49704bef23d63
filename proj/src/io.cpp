#include "afcmem/io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace afcmem::io {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& contents) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw std::runtime_error("atomic_write: write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string csv_document(const std::vector<CsvColumn>& columns) {
    if (columns.empty()) throw std::invalid_argument("csv_document: no columns");
    const std::size_t rows = columns.front().values->size();
    for (const auto& c : columns) {
        if (c.values->size() != rows) throw std::invalid_argument("csv_document: ragged columns");
    }
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out += columns[c].header;
        out += (c + 1 < columns.size()) ? ',' : '\n';
    }
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            out += format_double((*columns[c].values)[r]);
            out += (c + 1 < columns.size()) ? ',' : '\n';
        }
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<CsvColumn>& columns) {
    atomic_write(path, csv_document(columns));
}

}  // namespace afcmem::io
