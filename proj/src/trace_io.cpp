#include "stomem/trace_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

namespace stomem {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t begin = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, begin);
    fields.push_back(line.substr(begin, pos == std::string_view::npos ? pos : pos - begin));
    if (pos == std::string_view::npos) break;
    begin = pos + 1;
  }
  return fields;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

double parse_number(std::string_view field, std::size_t line) {
  field = strip(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw CsvError("not a number: '" + std::string(field) + "'", line);
  }
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string(), 0);
  return in;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << kTraceCsvHeader << '\n';
  for (const auto& r : trace.rows) {
    out << format_double(r.t) << ',' << format_double(r.g) << ',' << format_double(r.current)
        << ',' << format_double(r.v_applied) << ',' << format_double(r.p_opt) << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const Trace& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  write_text_file(path, out.str());
}

Trace read_trace_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw CsvError("empty CSV", 1);
  ++line_no;
  if (strip(line) != kTraceCsvHeader) {
    throw CsvError(std::string("header must be '") + kTraceCsvHeader + "'", line_no);
  }
  Trace trace;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    const auto fields = split(strip(line), ',');
    if (fields.size() != 5) {
      throw CsvError("expected 5 fields, found " + std::to_string(fields.size()), line_no);
    }
    TraceRow r;
    r.t = parse_number(fields[0], line_no);
    r.g = parse_number(fields[1], line_no);
    r.current = parse_number(fields[2], line_no);
    r.v_applied = parse_number(fields[3], line_no);
    r.p_opt = parse_number(fields[4], line_no);
    if (!trace.rows.empty() && !(r.t > trace.rows.back().t)) {
      throw CsvError("time column must be strictly increasing", line_no);
    }
    trace.rows.push_back(r);
  }
  if (trace.rows.empty()) throw CsvError("no data rows", line_no);
  return trace;
}

Trace read_trace_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_trace_csv(in);
}

std::vector<std::pair<double, double>> read_points_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw CsvError("empty CSV", 1);
  ++line_no;
  if (split(strip(line), ',').size() != 2) throw CsvError("header must have 2 columns", line_no);
  std::vector<std::pair<double, double>> points;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    const auto fields = split(strip(line), ',');
    if (fields.size() != 2) {
      throw CsvError("expected 2 fields, found " + std::to_string(fields.size()), line_no);
    }
    points.emplace_back(parse_number(fields[0], line_no), parse_number(fields[1], line_no));
  }
  if (points.empty()) throw CsvError("no data rows", line_no);
  return points;
}

std::vector<std::pair<double, double>> read_points_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_points_csv(in);
}

void write_points_csv(std::ostream& out, const std::vector<std::pair<double, double>>& points,
                      const std::string& header) {
  out << header << '\n';
  for (const auto& [x, y] : points) out << format_double(x) << ',' << format_double(y) << '\n';
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace stomem
