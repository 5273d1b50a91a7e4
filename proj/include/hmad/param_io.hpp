#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hmad/errors.hpp"
#include "hmad/fusion.hpp"

namespace hmad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Flat little-endian container: the 8-byte magic "HMADPAR1" followed by one
// record per tensor until end of stream:
//   u32 name_length | name bytes (UTF-8) | u32 rank | u64 extent * rank |
//   f64 value * product(extents)
inline constexpr char kParamMagic[] = "HMADPAR1";

void write_param_container(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_param_container(std::istream& in);

// Fusion parameters plus a "geometry" record (Cs, Hs, Ws, C, H, W).
std::vector<NamedTensor> to_records(const FusionParams& params);
FusionParams from_records(const std::vector<NamedTensor>& records);

void save_fusion_params(const FusionParams& params, const std::filesystem::path& path);
FusionParams load_fusion_params(const std::filesystem::path& path);

}  // namespace hmad
