#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace bnn {

/// Fixed-precision formatting so that equal doubles always print to equal bytes.
/// Non-finite values print as "nan", "inf", "-inf".
std::string format_double(double v, int significant_digits = 12);

/// Minimal CSV writer: no quoting, so fields must not contain commas or newlines.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& fields);
  void close();

 private:
  std::ofstream out_;
  std::size_t columns_;
  std::filesystem::path path_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws naming the missing column.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Parses a field written by format_double (accepts nan/inf).
double parse_double(const std::string& field);

}  // namespace bnn
