#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "msdc/linalg.hpp"
#include "msdc/model.hpp"
#include "msdc/tensor.hpp"

namespace msdc {

// 8-bit (maxval <= 255) or 16-bit grayscale raster from a binary PGM.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint32_t maxval = 255;
  std::vector<std::uint16_t> pixels;  // row-major
};

GrayImage read_pgm(const std::filesystem::path& path);
// Writes P5 with a canonical "P5\n<w> <h>\n<maxval>\n" header.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// [1, 1, h, w] tensor scaled to [0, 1].
Tensor to_unit_tensor(const GrayImage& image);
// Rounds clamp(x, 0, 1) * 255 to 8-bit.
GrayImage from_unit_tensor(const Tensor& t);

// "MSDY" measurement file: 16-byte header (magic, u32 rows, u32 cols,
// u32 image side) followed by row-major little-endian doubles.
struct MeasurementFile {
  Matrix y;
  std::uint32_t image_side = 0;
};
void write_measurement(const std::filesystem::path& path, const Matrix& y, std::uint32_t image_side);
MeasurementFile read_measurement(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "MSDC" checkpoint: magic, u32 version, u32 n, m, C, g, s, u32 blob count,
// then per blob: u32 name length, name, 4 x u32 extents, row-major doubles.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

// Flat "key = value" file; '#' starts a comment. Keys outside `allowed`
// raise ConfigError.
std::map<std::string, std::string> read_config(const std::filesystem::path& path,
                                               const std::vector<std::string>& allowed);

}  // namespace msdc
