#pragma once

#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ckpl {

// Shortest decimal string that round-trips to the same double.
std::string format_real(double value);

// Minimal RFC 4180 writer: fields containing comma, quote, CR or LF are
// quoted with inner quotes doubled; records end in CRLF.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}
  void row(std::initializer_list<std::string_view> fields);
  void row(const std::vector<std::string>& fields);

 private:
  void field(std::string_view f, bool first);
  std::ostream& os_;
};

// Parses RFC 4180 text back into records (used by tests and the eval path).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace ckpl
