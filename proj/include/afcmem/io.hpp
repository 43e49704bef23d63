// io.hpp — atomic file writes and CSV helpers
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace afcmem::io {

// Full-precision decimal formatting used for every numeric output.
std::string format_double(double x);

// Write via a temporary file in the same directory, then rename. An
// interrupted run never leaves a partial file at the final path.
void atomic_write(const std::filesystem::path& path, const std::string& contents);

struct CsvColumn {
    std::string header;
    const std::vector<double>* values;
};

std::string csv_document(const std::vector<CsvColumn>& columns);

void write_csv(const std::filesystem::path& path, const std::vector<CsvColumn>& columns);

}  // namespace afcmem::io
