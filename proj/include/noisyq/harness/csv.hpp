#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace noisyq::harness {

/// Formats a double so it round-trips exactly (17 significant digits).
std::string fmt_double(double v);
std::string fmt_int(long long v);

/// CSV with a header row and a leading `schema` column carried on every row.
/// Content is buffered and written atomically on close, so reruns of the
/// same configuration produce byte-identical files.
class CsvWriter {
 public:
  CsvWriter(std::filesystem::path path, std::string schema, std::vector<std::string> columns);
  ~CsvWriter();

  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& cells);
  void close();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::string schema_;
  std::size_t columns_ = 0;
  std::string buffer_;
  bool closed_ = false;
};

struct CsvTable {
  std::string schema;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column_index(const std::string& name) const;  // -1 when absent
  const std::string& cell(std::size_t row, const std::string& column) const;
};

/// Reads a CSV produced by CsvWriter; rejects files whose schema column does
/// not carry `expected_schema`.
CsvTable read_csv(const std::filesystem::path& path, const std::string& expected_schema);

/// Writes text to path atomically (temp file + rename).
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

std::string read_text(const std::filesystem::path& path);

}  // namespace noisyq::harness
