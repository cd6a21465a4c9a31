#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tlsinv/scan.hpp"

namespace tlsinv {

/// Fixed decimal with 6 places; the only float format written to disk.
std::string fixed6(double value);

/// Minimal streaming JSON writer. Doubles are always written with fixed6 so that
/// output bytes are a pure function of the values.
class JsonWriter {
 public:
  explicit JsonWriter(int indent = 2) : indent_(indent) {}

  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view name);
  JsonWriter& value(double v);
  JsonWriter& value(long long v);
  JsonWriter& value(int v) { return value(static_cast<long long>(v)); }
  JsonWriter& value(std::size_t v) { return value(static_cast<long long>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& null();

  template <typename T>
  JsonWriter& field(std::string_view name, const T& v) {
    key(name);
    return value(v);
  }

  const std::string& str() const { return out_; }

 private:
  void before_value();
  void newline();
  void write_string(std::string_view v);

  struct Level {
    bool is_object = false;
    bool empty = true;
  };
  std::string out_;
  std::vector<Level> stack_;
  bool after_key_ = false;
  int indent_;
};

struct ScanFile {
  Scan scan;
  std::map<std::string, std::string> metadata;  // extra "# key=value" lines, e.g. seed
};

/// CSV body preceded by one "# key=value" line per ScannerConfig field.
std::string format_scan_csv(const Scan& scan, const std::map<std::string, std::string>& metadata = {});
void write_scan_csv(const std::filesystem::path& path, const Scan& scan,
                    const std::map<std::string, std::string>& metadata = {});

/// Throws ParseError with the 1-based line number of the first malformed line.
ScanFile parse_scan_csv(std::string_view text);
ScanFile read_scan_csv(const std::filesystem::path& path);

/// Binary PGM (P5), maxval 255.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Splits a CSV file into trimmed fields per non-empty, non-comment line. The
/// returned line numbers are 1-based.
struct CsvRow {
  std::size_t line_number = 0;
  std::vector<std::string> fields;
};
std::vector<CsvRow> parse_csv_rows(std::string_view text);

double parse_double(std::string_view field, std::size_t line_number);
long long parse_integer(std::string_view field, std::size_t line_number);

}  // namespace tlsinv
