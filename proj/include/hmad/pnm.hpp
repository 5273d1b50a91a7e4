#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hmad {

// Binary Netpbm image: P6 (3 samples per pixel) or P5 (1 sample per pixel).
// Samples are interleaved row-major; 16-bit samples are big-endian on disk.
struct PnmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::uint32_t maxval = 0;
  std::vector<std::uint16_t> samples;
};

void write_pnm(const std::filesystem::path& path, const PnmImage& image);

// Throws FormatError naming the path and byte offset of the first defect.
PnmImage read_pnm(const std::filesystem::path& path);

}  // namespace hmad
