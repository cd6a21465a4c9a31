#include "tlsinv/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tlsinv/error.hpp"

namespace tlsinv {

std::string fixed6(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::InvalidConfig, "cannot format non-finite number");
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed, 6);
  if (ec != std::errc()) throw Error(ErrorCode::IoError, "number formatting failed");
  std::string s(buf.data(), end);
  if (s == "-0.000000") s.erase(0, 1);
  return s;
}

// ---------------------------------------------------------------------------
// JsonWriter

void JsonWriter::newline() {
  out_ += '\n';
  out_.append(stack_.size() * static_cast<std::size_t>(indent_), ' ');
}

void JsonWriter::before_value() {
  if (after_key_) {
    after_key_ = false;
    return;
  }
  if (!stack_.empty()) {
    if (!stack_.back().empty) out_ += ',';
    stack_.back().empty = false;
    newline();
  }
}

JsonWriter& JsonWriter::begin_object() {
  before_value();
  out_ += '{';
  stack_.push_back({true, true});
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  const bool empty = stack_.back().empty;
  stack_.pop_back();
  if (!empty) newline();
  out_ += '}';
  if (stack_.empty()) out_ += '\n';
  return *this;
}

JsonWriter& JsonWriter::begin_array() {
  before_value();
  out_ += '[';
  stack_.push_back({false, true});
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  const bool empty = stack_.back().empty;
  stack_.pop_back();
  if (!empty) newline();
  out_ += ']';
  if (stack_.empty()) out_ += '\n';
  return *this;
}

JsonWriter& JsonWriter::key(std::string_view name) {
  before_value();
  write_string(name);
  out_ += ": ";
  after_key_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(double v) {
  before_value();
  out_ += fixed6(v);
  return *this;
}

JsonWriter& JsonWriter::value(long long v) {
  before_value();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(bool v) {
  before_value();
  out_ += v ? "true" : "false";
  return *this;
}

JsonWriter& JsonWriter::null() {
  before_value();
  out_ += "null";
  return *this;
}

JsonWriter& JsonWriter::value(std::string_view v) {
  before_value();
  write_string(v);
  return *this;
}

void JsonWriter::write_string(std::string_view v) {
  out_ += '"';
  for (char ch : v) {
    switch (ch) {
      case '"': out_ += "\\\""; break;
      case '\\': out_ += "\\\\"; break;
      case '\n': out_ += "\\n"; break;
      case '\t': out_ += "\\t"; break;
      case '\r': out_ += "\\r"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          std::array<char, 8> esc{};
          std::snprintf(esc.data(), esc.size(), "\\u%04x", ch);
          out_ += esc.data();
        } else {
          out_ += ch;
        }
    }
  }
  out_ += '"';
}

// ---------------------------------------------------------------------------
// Files

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::string data = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  data.append(reinterpret_cast<const char*>(image.values.data()), image.values.size());
  write_text_file(path, data);
}

// ---------------------------------------------------------------------------
// CSV helpers

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void parse_fail(std::size_t line_number, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line_number) + ": " + what);
}

// Fast path for the scan body: exactly n comma-separated fields.
template <std::size_t N>
bool split_fields(std::string_view line, std::array<std::string_view, N>& out) {
  std::size_t start = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t comma = line.find(',', start);
    if (i + 1 < N) {
      if (comma == std::string_view::npos) return false;
      out[i] = trim(line.substr(start, comma - start));
      start = comma + 1;
    } else {
      if (comma != std::string_view::npos) return false;
      out[i] = trim(line.substr(start));
    }
  }
  return true;
}

struct ConfigField {
  const char* name;
  double ScannerConfig::*member;
};

constexpr std::array<ConfigField, 11> kConfigFields = {{
    {"vertical_step_deg", &ScannerConfig::vertical_step_deg},
    {"horizontal_step_deg", &ScannerConfig::horizontal_step_deg},
    {"elevation_min_deg", &ScannerConfig::elevation_min_deg},
    {"elevation_max_deg", &ScannerConfig::elevation_max_deg},
    {"min_range_m", &ScannerConfig::min_range_m},
    {"max_range_m", &ScannerConfig::max_range_m},
    {"range_noise_sigma_m", &ScannerConfig::range_noise_sigma_m},
    {"rotation_speed_deg_per_s", &ScannerConfig::rotation_speed_deg_per_s},
    {"scan_rate_hz", &ScannerConfig::scan_rate_hz},
    {"beam_divergence_mrad", &ScannerConfig::beam_divergence_mrad},
    {"footprint_noise_scale", &ScannerConfig::footprint_noise_scale},
}};

constexpr std::string_view kScanHeader = "line_index,beam_index,elevation_deg,azimuth_deg,range_m,intensity";

}  // namespace

double parse_double(std::string_view field, std::size_t line_number) {
  field = trim(field);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    parse_fail(line_number, "expected a number, got '" + std::string(field) + "'");
  }
  return v;
}

long long parse_integer(std::string_view field, std::size_t line_number) {
  field = trim(field);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    parse_fail(line_number, "expected an integer, got '" + std::string(field) + "'");
  }
  return v;
}

std::vector<CsvRow> parse_csv_rows(std::string_view text) {
  std::vector<CsvRow> rows;
  std::size_t line_number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_number;
    if (line.empty() || line.front() == '#') continue;
    CsvRow row;
    row.line_number = line_number;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      row.fields.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_scan_csv(const Scan& scan, const std::map<std::string, std::string>& metadata) {
  std::string out;
  out.reserve(scan.records.size() * 48 + 1024);
  for (const auto& f : kConfigFields) {
    out += "# ";
    out += f.name;
    out += '=';
    out += fixed6(scan.config.*f.member);
    out += '\n';
  }
  for (const auto& [k, v] : metadata) {
    out += "# " + k + "=" + v + "\n";
  }
  out += kScanHeader;
  out += '\n';

  std::array<char, 32> buf{};
  auto put_int = [&](unsigned long long v) {
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.append(buf.data(), end);
  };
  auto put_fixed = [&](double v) {
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, 6);
    std::string_view s(buf.data(), static_cast<std::size_t>(end - buf.data()));
    if (s == "-0.000000") s.remove_prefix(1);
    out += s;
  };
  for (const auto& r : scan.records) {
    put_int(r.line_index);
    out += ',';
    put_int(r.beam_index);
    out += ',';
    put_fixed(r.elevation_deg);
    out += ',';
    put_fixed(r.azimuth_deg);
    out += ',';
    put_fixed(r.range_m);
    out += ',';
    put_int(r.intensity);
    out += '\n';
  }
  return out;
}

void write_scan_csv(const std::filesystem::path& path, const Scan& scan,
                    const std::map<std::string, std::string>& metadata) {
  write_text_file(path, format_scan_csv(scan, metadata));
}

ScanFile parse_scan_csv(std::string_view text) {
  ScanFile file;
  auto& cfg = file.scan.config;
  bool header_seen = false;
  std::size_t line_number = 0;
  std::size_t pos = 0;
  std::array<std::string_view, 6> f;

  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_number;
    if (line.empty()) continue;

    if (line.front() == '#') {
      if (header_seen) parse_fail(line_number, "comment after header");
      line.remove_prefix(1);
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string key(trim(line.substr(0, eq)));
      const std::string_view val = trim(line.substr(eq + 1));
      bool known = false;
      for (const auto& cf : kConfigFields) {
        if (key == cf.name) {
          cfg.*cf.member = parse_double(val, line_number);
          known = true;
        }
      }
      if (!known) file.metadata[key] = std::string(val);
      continue;
    }

    if (!header_seen) {
      if (line != kScanHeader) parse_fail(line_number, "expected header '" + std::string(kScanHeader) + "'");
      header_seen = true;
      try {
        validate(cfg);
      } catch (const Error& e) {
        parse_fail(line_number, e.what());
      }
      continue;
    }

    if (!split_fields(line, f)) parse_fail(line_number, "expected 6 fields");
    ScanRecord r;
    const long long li = parse_integer(f[0], line_number);
    const long long bi = parse_integer(f[1], line_number);
    const long long in = parse_integer(f[5], line_number);
    if (li < 0 || bi < 0 || li > 0xffffffffLL || bi > 0xffffffffLL) parse_fail(line_number, "index out of range");
    if (in < 0 || in > 255) parse_fail(line_number, "intensity outside 0-255");
    r.line_index = static_cast<std::uint32_t>(li);
    r.beam_index = static_cast<std::uint32_t>(bi);
    r.elevation_deg = parse_double(f[2], line_number);
    r.azimuth_deg = parse_double(f[3], line_number);
    r.range_m = parse_double(f[4], line_number);
    r.intensity = static_cast<std::uint8_t>(in);
    const auto problem = record_problem(cfg, r, file.scan.records.empty() ? nullptr : &file.scan.records.back());
    if (problem) parse_fail(line_number, *problem);
    file.scan.records.push_back(r);
  }
  if (!header_seen) throw Error(ErrorCode::ParseError, "missing scan header line");
  return file;
}

ScanFile read_scan_csv(const std::filesystem::path& path) { return parse_scan_csv(read_text_file(path)); }

}  // namespace tlsinv
