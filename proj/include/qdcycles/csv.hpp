#pragma once

// Comma-separated output: a "# columns:" schema line, a header row, then
// rows with doubles printed to 17 significant digits.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qdcycles/errors.hpp"

namespace qdc {

using CsvCell = std::variant<double, long long, std::string>;

inline std::string format_cell(const CsvCell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *d);
    return buf;
  }
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns)
      : out_(path, std::ios::binary), columns_(std::move(columns)) {
    if (!out_) throw PreconditionError("cannot open " + path.string() + " for writing");
    std::string header;
    for (std::size_t i = 0; i < columns_.size(); ++i) header += (i ? "," : "") + columns_[i];
    out_ << "# columns: " << header << '\n' << header << '\n';
  }

  void row(const std::vector<CsvCell>& cells) {
    if (cells.size() != columns_.size()) throw PreconditionError("csv: row width does not match the header");
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << format_cell(cells[i]);
    out_ << '\n';
  }

  /// Integer cells are common enough to deserve a shorthand.
  static CsvCell integer(std::size_t v) { return static_cast<long long>(v); }

 private:
  std::ofstream out_;
  std::vector<std::string> columns_;
};

}  // namespace qdc
