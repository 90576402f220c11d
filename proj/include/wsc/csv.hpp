#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "wsc/error.hpp"

namespace wsc {

/// Round-trip-safe float formatting: 17 significant digits, '.' decimal.
inline std::string csv_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_size(std::size_t x) { return std::to_string(x); }

class CsvFile {
 public:
  CsvFile(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) fail(errc::io, "cannot open '" + path + "' for writing");
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
};

}  // namespace wsc
