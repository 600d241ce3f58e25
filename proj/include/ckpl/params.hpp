#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ckpl/tensor.hpp"

namespace ckpl {

inline constexpr std::string_view kParamsHeader = "CKPL-PARAMS-v1";

// A parameter tensor keyed by its module path, e.g. "base.blocks.0.qkv_weight".
struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedTensor>;

// Text format:
//   CKPL-PARAMS-v1
//   <count>
//   then per tensor two lines: "<name> <rank> <dims...>" and the values,
//   space separated, in shortest round-trip decimal form.
void write_params(std::ostream& os, const ParameterList& params);
ParameterList read_params(std::istream& is);
void save_params(const std::filesystem::path& path, const ParameterList& params);
ParameterList load_params(const std::filesystem::path& path);

// Copies values from `source` into same-named `targets`; every target must be
// present with an identical shape. Extra source entries are ignored.
void assign_params(const ParameterList& targets, const ParameterList& source);

// Lower-case hex SHA-256 over names, shapes and the raw IEEE-754 bytes.
std::string params_sha256(const ParameterList& params);

std::size_t count_values(const ParameterList& params);

}  // namespace ckpl
