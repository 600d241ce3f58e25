#include "ckpl/params.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "ckpl/errors.hpp"

namespace ckpl {

namespace {

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view token) {
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw ValidationError("malformed number '" + std::string(token) + "' in parameter file");
  }
  return v;
}

}  // namespace

void write_params(std::ostream& os, const ParameterList& params) {
  os << kParamsHeader << '\n' << params.size() << '\n';
  for (const auto& p : params) {
    if (p.name.empty() || p.name.find_first_of(" \t\n") != std::string::npos) {
      throw ValidationError("parameter name '" + p.name + "' is empty or has whitespace");
    }
    const auto& shape = p.tensor.shape();
    os << p.name << ' ' << shape.size();
    for (auto d : shape) os << ' ' << d;
    os << '\n';
    auto values = p.tensor.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) os << ' ';
      os << format_double(values[i]);
    }
    os << '\n';
  }
}

ParameterList read_params(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kParamsHeader) {
    throw ValidationError("parameter file does not start with " + std::string(kParamsHeader));
  }
  std::size_t count = 0;
  if (!std::getline(is, line)) throw ValidationError("parameter file truncated");
  auto res = std::from_chars(line.data(), line.data() + line.size(), count);
  if (res.ec != std::errc()) throw ValidationError("malformed parameter count: " + line);
  ParameterList out;
  for (std::size_t k = 0; k < count; ++k) {
    if (!std::getline(is, line)) throw ValidationError("parameter file truncated");
    std::istringstream head(line);
    std::string name;
    std::size_t rank = 0;
    head >> name >> rank;
    Shape shape(rank);
    for (auto& d : shape) head >> d;
    if (!head) throw ValidationError("malformed parameter header: " + line);
    if (!std::getline(is, line)) throw ValidationError("parameter file truncated at " + name);
    std::vector<double> values;
    values.reserve(shape_size(shape));
    std::string_view rest(line);
    while (!rest.empty()) {
      auto sp = rest.find(' ');
      values.push_back(parse_double(rest.substr(0, sp)));
      if (sp == std::string_view::npos) break;
      rest.remove_prefix(sp + 1);
    }
    out.push_back({name, Tensor(std::move(shape), std::move(values))});
  }
  return out;
}

void save_params(const std::filesystem::path& path, const ParameterList& params) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_params(os, params);
  if (!os) throw IoError("failed writing " + path.string());
}

ParameterList load_params(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return read_params(is);
}

void assign_params(const ParameterList& targets, const ParameterList& source) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& s : source) by_name[s.name] = &s.tensor;
  for (const auto& t : targets) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw LookupError("parameter '" + t.name + "' missing from source");
    if (it->second->shape() != t.tensor.shape()) {
      throw DimensionError("parameter '" + t.name + "' has shape " +
                           shape_str(it->second->shape()) + ", expected " +
                           shape_str(t.tensor.shape()));
    }
    auto src = it->second->values();
    Tensor target = t.tensor;
    std::copy(src.begin(), src.end(), target.mutable_values().begin());
  }
}

std::string params_sha256(const ParameterList& params) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 initialization failed");
  }
  for (const auto& p : params) {
    EVP_DigestUpdate(ctx.get(), p.name.data(), p.name.size() + 1);
    const auto& shape = p.tensor.shape();
    for (std::uint64_t d : shape) EVP_DigestUpdate(ctx.get(), &d, sizeof d);
    auto values = p.tensor.values();
    EVP_DigestUpdate(ctx.get(), values.data(), values.size() * sizeof(double));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::size_t count_values(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

}  // namespace ckpl
