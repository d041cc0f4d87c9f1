#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "xrecon/geometry.hpp"

namespace xrecon {

/// Attenuation grid (mm^-1, arbitrary units). x varies fastest in `values`.
/// `origin` is the world position of voxel (0,0,0)'s center.
struct Volume3D {
  std::array<std::size_t, 3> dims{2, 2, 2};
  Vec3 spacing{1, 1, 1};
  Vec3 origin{};
  std::vector<float> values;

  Volume3D() = default;
  Volume3D(std::array<std::size_t, 3> dims, Vec3 spacing, Vec3 origin);

  /// Cell-centered grid covering the recon space with `n` voxels per axis.
  static Volume3D covering(const ReconSpace& space, std::size_t n);

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (k * dims[1] + j) * dims[0] + i; }
  float at(std::size_t i, std::size_t j, std::size_t k) const { return values[index(i, j, k)]; }
  float& at(std::size_t i, std::size_t j, std::size_t k) { return values[index(i, j, k)]; }
  Vec3 voxel_center(std::size_t i, std::size_t j, std::size_t k) const;

  /// Trilinear interpolation; zero outside the hull of voxel centers.
  double sample(const Vec3& p) const;

  /// Throws InvalidArgument on negative or non-finite values or dims < 2.
  void validate() const;
};

/// One projection image. `pixels` is row-major (rows x cols).
struct DRRImage {
  std::size_t view = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> pixels;
  // Range of the raw values a normalized image was mapped from.
  double norm_min = 0;
  double norm_max = 1;
  bool normalized = false;

  float at(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
};

/// Min-max map to [0,1]; a constant image maps to zeros.
DRRImage normalize_image(const DRRImage& img);
/// Inverse of normalize_image using the stored range.
DRRImage denormalize_image(const DRRImage& img);

// Raw little-endian float32 blob `<stem>.raw` plus JSON sidecar `<stem>.json`.
void write_volume(const Volume3D& vol, const std::filesystem::path& stem);
Volume3D read_volume(const std::filesystem::path& stem);
void write_image(const DRRImage& img, const std::filesystem::path& stem);
DRRImage read_image(const std::filesystem::path& stem);
/// 8-bit binary PGM for quick inspection (values min-max scaled).
void write_pgm(const DRRImage& img, const std::filesystem::path& path);

/// Whole-file helpers; create parent directories on write. IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

void write_f32_blob(const std::filesystem::path& path, const std::vector<float>& values);
std::vector<float> read_f32_blob(const std::filesystem::path& path, std::size_t expected);

}  // namespace xrecon
