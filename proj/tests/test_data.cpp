#include <gtest/gtest.h>

#include <zlib.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "artk/data.hpp"

using namespace artk;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("artk_data_" + std::to_string(::getpid()) + "_" +
                                                 std::to_string(counter_++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), b.size());
}

std::vector<unsigned char> header(std::uint32_t magic, std::vector<std::uint32_t> dims) {
  std::vector<unsigned char> b;
  auto put = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back((v >> s) & 0xff);
  };
  put(magic);
  for (auto d : dims) put(d);
  return b;
}

}  // namespace

TEST(LoadIdx, TwoImages) {
  TempDir dir;
  auto im = header(0x803, {2, 28, 28});
  for (int i = 0; i < 1568; ++i) im.push_back(i == 0 ? 255 : (i == 1 ? 0 : i % 256));
  auto lb = header(0x801, {2});
  lb.push_back(7);
  lb.push_back(3);
  write_bytes(dir / "im", im);
  write_bytes(dir / "lb", lb);
  Dataset ds = load_idx(dir / "im", dir / "lb");
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.images.shape(), (Shape{2, 1, 28, 28}));
  EXPECT_EQ(ds.images[0], 1.0);
  EXPECT_EQ(ds.images[1], 0.0);
  EXPECT_EQ(ds.labels, (std::vector<std::size_t>{7, 3}));
  for (Real v : ds.images.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_EQ(std::round(v * 255), v * 255);
  }
}

TEST(LoadIdx, DistinctErrors) {
  TempDir dir;
  auto im = header(0x803, {2, 2, 2});
  im.resize(im.size() + 8, 1);
  write_bytes(dir / "im", im);
  auto kind_of = [&](const std::string& images, const std::string& labels) {
    try {
      load_idx(dir / images, dir / labels);
    } catch (const DataError& e) {
      return e.kind();
    }
    return DataError::Kind::Empty;
  };
  auto wrong_magic = header(0x803, {2});
  wrong_magic.resize(wrong_magic.size() + 2);
  write_bytes(dir / "wrong_magic", wrong_magic);
  EXPECT_EQ(kind_of("im", "wrong_magic"), DataError::Kind::BadMagic);

  auto short_lb = header(0x801, {2});
  short_lb.push_back(1);
  write_bytes(dir / "short", short_lb);
  EXPECT_EQ(kind_of("im", "short"), DataError::Kind::Truncated);

  auto three = header(0x801, {3});
  three.resize(three.size() + 3);
  write_bytes(dir / "three", three);
  EXPECT_EQ(kind_of("im", "three"), DataError::Kind::CountMismatch);

  EXPECT_EQ(kind_of("nope", "three"), DataError::Kind::Missing);
}

TEST(LoadIdx, GzipTransparent) {
  TempDir dir;
  Dataset src = synthetic_blobs(6, 3, 1);
  save_idx(src, dir / "im", dir / "lb");
  std::ifstream in(dir / "im", std::ios::binary);
  std::string raw((std::istreambuf_iterator<char>(in)), {});
  gzFile gz = gzopen((dir / "im.gz").c_str(), "wb");
  gzwrite(gz, raw.data(), unsigned(raw.size()));
  gzclose(gz);
  Dataset a = load_idx(dir / "im.gz", dir / "lb");
  EXPECT_TRUE(a.images == src.images);
  EXPECT_EQ(a.labels, src.labels);
}

TEST(Batches, SizesOrderAndCoverage) {
  auto b = epoch_batches(10, 4, 1, 0, true);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 4u);
  EXPECT_EQ(b[2].size(), 2u);
  EXPECT_EQ(b, epoch_batches(10, 4, 1, 0, true));
  EXPECT_NE(b, epoch_batches(10, 4, 1, 1, true));
  auto plain = epoch_batches(10, 4, 1, 0, false);
  EXPECT_EQ(plain[0], (std::vector<std::size_t>{0, 1, 2, 3}));
  for (std::size_t epoch = 0; epoch < 5; ++epoch) {
    std::multiset<std::size_t> seen;
    for (const auto& batch : epoch_batches(97, 8, 3, epoch, true)) seen.insert(batch.begin(), batch.end());
    ASSERT_EQ(seen.size(), 97u);
    for (std::size_t i = 0; i < 97; ++i) EXPECT_EQ(seen.count(i), 1u);
  }
}

TEST(Batches, CarryData) {
  Dataset ds = synthetic_blobs(10, 2, 4);
  auto bs = batches(ds, 4, 9, true);
  ASSERT_EQ(bs.size(), 3u);
  for (const auto& b : bs) {
    for (std::size_t j = 0; j < b.indices.size(); ++j) {
      EXPECT_EQ(b.labels[j], ds.labels[b.indices[j]]);
      EXPECT_EQ(b.x[j * 64 + 10], ds.images[b.indices[j] * 64 + 10]);
    }
  }
}

TEST(SyntheticBlobs, DeterministicAndBalanced) {
  Dataset a = synthetic_blobs(41, 4, 2), b = synthetic_blobs(41, 4, 2);
  EXPECT_TRUE(a.images == b.images);
  std::vector<int> count(4);
  for (auto l : a.labels) ++count[l];
  for (int c : count) EXPECT_NEAR(c, 41.0 / 4, 1.0);
  a.validate();
  for (Real v : a.images.data()) EXPECT_EQ(std::round(v * 255), v * 255);
  EXPECT_FALSE(synthetic_blobs(41, 4, 3).images == a.images);
}
