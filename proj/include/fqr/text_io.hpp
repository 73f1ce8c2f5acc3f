#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fqr {

// Locale-independent float formatting at 17 significant digits, enough to
// round-trip any double exactly.
std::string format_double(double value);

// strtod-based parse; throws std::invalid_argument naming `context` if the
// cell is not a finite number (or is empty).
double parse_double(const std::string& cell, const std::string& context);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 if absent
};

// Minimal CSV: comma separated, no quoting, '#'-prefixed lines are skipped
// (used for embedded manifests).  Ragged rows are an error naming the line.
CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table,
               const std::string& comment_prefix_line = "");

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// FNV-1a 64-bit over raw bytes, hex-encoded; used to fingerprint input files
// in run manifests.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace fqr
