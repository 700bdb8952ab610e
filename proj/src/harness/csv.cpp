#include "noisyq/harness/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace noisyq::harness {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_int(long long v) { return std::to_string(v); }

CsvWriter::CsvWriter(std::filesystem::path path, std::string schema,
                     std::vector<std::string> columns)
    : path_(std::move(path)), schema_(std::move(schema)), columns_(columns.size() + 1) {
  buffer_ = "schema";
  for (const std::string& c : columns) {
    buffer_ += ',';
    buffer_ += c;
  }
  buffer_ += '\n';
}

CsvWriter::~CsvWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
      // destructor must not throw; an explicit close() reports errors
    }
  }
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() + 1 != columns_) {
    throw std::invalid_argument("CsvWriter: expected " + std::to_string(columns_ - 1) +
                                " cells, got " + std::to_string(cells.size()));
  }
  buffer_ += schema_;
  for (const std::string& c : cells) {
    buffer_ += ',';
    buffer_ += c;
  }
  buffer_ += '\n';
}

void CsvWriter::close() {
  if (closed_) return;
  closed_ = true;
  atomic_write_text(path_, buffer_);
}

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

const std::string& CsvTable::cell(std::size_t row, const std::string& column) const {
  int idx = column_index(column);
  if (idx < 0) throw std::invalid_argument("CsvTable: no column '" + column + "'");
  return rows.at(row).at(static_cast<std::size_t>(idx));
}

namespace {
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace

CsvTable read_csv(const std::filesystem::path& path, const std::string& expected_schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV file " + path.string());
  std::vector<std::string> header = split_csv_line(line);
  if (header.empty() || header[0] != "schema") {
    throw std::runtime_error("CSV file " + path.string() + " has no schema column");
  }
  table.columns.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("CSV file " + path.string() + " has a ragged row");
    }
    if (table.schema.empty()) table.schema = cells[0];
    if (cells[0] != table.schema) {
      throw std::runtime_error("CSV file " + path.string() + " mixes schema versions");
    }
    table.rows.emplace_back(cells.begin() + 1, cells.end());
  }
  if (!table.rows.empty() && table.schema != expected_schema) {
    throw std::runtime_error("CSV file " + path.string() + " carries schema '" + table.schema +
                             "', expected '" + expected_schema + "'");
  }
  if (table.rows.empty()) table.schema = expected_schema;
  return table;
}

void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace noisyq::harness
