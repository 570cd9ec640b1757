#pragma once

// MNIST-style IDX ingestion, batching and a synthetic dataset.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "artk/tensor.hpp"

namespace artk {

class DataError : public std::runtime_error {
 public:
  enum class Kind { Missing, BadMagic, Truncated, CountMismatch, BadLabel, BadPixel, Empty };
  DataError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct Dataset {
  Tensor images;  // (N, C, H, W) in [0, 1]
  std::vector<std::size_t> labels;
  std::string split;
  std::size_t class_count = 10;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const;  // (1, C, H, W)
  Tensor sample(std::size_t i) const;
  // Rows in the given order.
  Dataset select(const std::vector<std::size_t>& indices) const;
  // First n rows (all when n == 0 or n >= size).
  Dataset head(std::size_t n) const;
  void validate() const;
};

// Big-endian IDX: images 0x00000803 (N, H, W), labels 0x00000801 (N).
// Gzip-compressed files are decompressed transparently.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::string split = "");

// Writes uncompressed IDX files (used by tests and tools).
void save_idx(const Dataset& ds, const std::filesystem::path& images,
              const std::filesystem::path& labels);

// Standard MNIST file names under `dir`, with or without .gz.
Dataset load_mnist_split(const std::filesystem::path& dir, const std::string& split);

struct Batch {
  Tensor x;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> indices;
};

// Index batches for one epoch; the shuffle depends only on (seed, epoch).
// The last partial batch is kept.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch,
                                                    bool shuffle);
std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                           bool shuffle, std::size_t epoch = 0);
Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices);

// One bright 3x3 square per class (classes <= 4, one per quadrant) on a
// faint noise floor. Pixel values are multiples of 1/255.
Dataset synthetic_blobs(std::size_t n, std::size_t classes, std::uint64_t seed,
                        std::size_t side = 8);

}  // namespace artk
