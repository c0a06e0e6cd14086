#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stomem/protocol.hpp"

namespace stomem {

inline constexpr const char* kTraceCsvHeader = "t_s,G_nS,I_A,V_applied_V,P_opt_mWcm2";

/// Malformed CSV input. `line()` is 1-based; 0 when no line applies.
class CsvError : public std::runtime_error {
 public:
  CsvError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Shortest representation that round-trips exactly ('.' decimal point,
/// locale independent).
std::string format_double(double value);

void write_trace_csv(std::ostream& out, const Trace& trace);
void write_trace_csv(const std::filesystem::path& path, const Trace& trace);

/// Parses the trace schema. Throws CsvError on an empty file, a header
/// mismatch or a malformed row.
Trace read_trace_csv(std::istream& in);
Trace read_trace_csv(const std::filesystem::path& path);

/// Two-column numeric CSV with a header line (x, y).
std::vector<std::pair<double, double>> read_points_csv(std::istream& in);
std::vector<std::pair<double, double>> read_points_csv(const std::filesystem::path& path);
void write_points_csv(std::ostream& out, const std::vector<std::pair<double, double>>& points,
                      const std::string& header = "x,y");

/// Writes `content` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace stomem
