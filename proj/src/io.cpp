#include "ckpl/io.hpp"

#include <array>
#include <charconv>
#include <ostream>

#include "ckpl/errors.hpp"

namespace ckpl {

std::string format_real(double value) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

void CsvWriter::field(std::string_view f, bool first) {
  if (!first) os_ << ',';
  if (f.find_first_of(",\"\r\n") == std::string_view::npos) {
    os_ << f;
    return;
  }
  os_ << '"';
  for (char c : f) {
    if (c == '"') os_ << '"';
    os_ << c;
  }
  os_ << '"';
}

void CsvWriter::row(std::initializer_list<std::string_view> fields) {
  bool first = true;
  for (auto f : fields) {
    field(f, first);
    first = false;
  }
  os_ << "\r\n";
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) field(fields[i], i == 0);
  os_ << "\r\n";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> current;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      current.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      current.push_back(std::move(cell));
      cell.clear();
      rows.push_back(std::move(current));
      current.clear();
      any = false;
    } else {
      cell += c;
    }
  }
  if (quoted) throw ValidationError("unterminated quoted CSV field");
  if (any || !cell.empty() || !current.empty()) {
    current.push_back(std::move(cell));
    rows.push_back(std::move(current));
  }
  return rows;
}

}  // namespace ckpl
