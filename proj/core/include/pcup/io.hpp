#pragma once

// Point-cloud and grayscale image file formats.

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcup/point_cloud.hpp"

namespace pcup {

/// Malformed file content. The message names the file and the line (text)
/// or byte offset (binary) where parsing stopped.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed file using a feature this reader does not handle.
class UnsupportedFormat : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CloudFormat { kPlyAscii, kPlyBinary, kXyz };

/// Format implied by the extension: .xyz is XYZ text, .ply is binary PLY.
CloudFormat format_for_path(const std::filesystem::path& path);

/// Writes x, y, z and, when present, the per-point attribute as "error".
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);

/// Reads PLY (ascii or binary_little_endian) or XYZ, chosen by content for
/// PLY and by extension otherwise.
PointCloud read_cloud(const std::filesystem::path& path);

PointCloud parse_ply(const std::string& bytes, const std::string& origin = "<memory>");
PointCloud parse_xyz(const std::string& text, const std::string& origin = "<memory>");
std::string format_ply(const PointCloud& cloud, bool binary);
std::string format_xyz(const PointCloud& cloud);

/// Row-major grayscale image with values in [0, 1].
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;

  float at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// 8-bit binary PGM (P5); values are quantized to round(255 v).
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
/// Reads P5 (8 or 16 bit) and P2, scaling by maxval.
GrayImage read_pgm(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace pcup
