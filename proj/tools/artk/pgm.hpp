#pragma once

// Binary greyscale PGM (P5) and CSV helpers for single-channel maps.

#include <filesystem>
#include <vector>

#include "artk/tensor.hpp"

namespace artk::cli {

// Values are clamped to [0, 1] and scaled to 0..255.
void write_pgm(const std::filesystem::path& path, const Real* values, std::size_t h, std::size_t w);
// Min-max scaled to 0..255; a constant map is written as all zeros.
void write_pgm_normalized(const std::filesystem::path& path, const std::vector<Real>& values,
                          std::size_t h, std::size_t w);
// (1, 1, H, W) in [0, 1]. Throws DataError on anything but P5 with maxval <= 255.
Tensor read_pgm(const std::filesystem::path& path);

// h rows of w comma-separated values, printed round-trip exact.
void write_csv(const std::filesystem::path& path, const std::vector<Real>& values, std::size_t h,
               std::size_t w);
std::vector<double> read_csv(const std::filesystem::path& path);

}  // namespace artk::cli
