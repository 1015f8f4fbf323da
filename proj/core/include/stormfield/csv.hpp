#pragma once

#include <filesystem>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace stormfield {

/// A comma-separated file with one header row. Fields are not quoted.
struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // 1-based file line of each row

  /// Column position; throws DataError if absent.
  int column(std::string_view name) const;
  bool has_column(std::string_view name) const;

  // Field accessors that throw DataError naming the file and line.
  int get_int(std::size_t row, int column) const;
  double get_double(std::size_t row, int column) const;
  const std::string& get(std::size_t row, int column) const;
};

CsvTable parse_csv(std::string_view text, std::string source);
CsvTable read_csv(const std::filesystem::path& path);

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header);

  CsvWriter& field(std::string_view s);
  CsvWriter& field(long long v);
  CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
  CsvWriter& field(double v);
  void end_row();

 private:
  std::ostream& out_;
  bool first_ = true;
};

/// Write `content` to `path` (binary, LF line endings), creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace stormfield
