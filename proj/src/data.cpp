#include "artk/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "artk/errors.hpp"
#include "artk/random.hpp"

namespace artk {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw DataError(DataError::Kind::Missing, "no such file: " + path.string());
  }
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw DataError(DataError::Kind::Missing, "cannot open " + path.string());
  std::vector<unsigned char> out;
  unsigned char buf[1 << 16];
  int got;
  while ((got = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + got);
  const bool failed = got < 0;
  gzclose(f);
  if (failed) throw DataError(DataError::Kind::Truncated, "corrupt gzip stream: " + path.string());
  return out;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
  return std::uint32_t(b[at]) << 24 | std::uint32_t(b[at + 1]) << 16 |
         std::uint32_t(b[at + 2]) << 8 | std::uint32_t(b[at + 3]);
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(b, 4);
}

struct Idx {
  std::vector<std::uint32_t> dims;
  std::vector<unsigned char> bytes;
  std::size_t offset;
};

Idx parse(const std::filesystem::path& path, std::uint32_t magic, std::size_t rank) {
  Idx idx{{}, read_all(path), 4 + 4 * rank};
  const auto& b = idx.bytes;
  if (b.size() < 4) throw DataError(DataError::Kind::Truncated, "truncated header: " + path.string());
  const std::uint32_t got = be32(b, 0);
  if (got != magic) {
    char msg[96];
    std::snprintf(msg, sizeof msg, "bad magic 0x%08x (expected 0x%08x) in ", got, magic);
    throw DataError(DataError::Kind::BadMagic, msg + path.string());
  }
  if (b.size() < idx.offset) {
    throw DataError(DataError::Kind::Truncated, "truncated header: " + path.string());
  }
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    idx.dims.push_back(be32(b, 4 + 4 * i));
    count *= idx.dims.back();
  }
  if (b.size() - idx.offset < count) {
    throw DataError(DataError::Kind::Truncated,
                    path.string() + ": expected " + std::to_string(count) + " data bytes, found " +
                        std::to_string(b.size() - idx.offset));
  }
  return idx;
}

}  // namespace

Shape Dataset::sample_shape() const {
  Shape s = images.shape();
  s[0] = 1;
  return s;
}

Tensor Dataset::sample(std::size_t i) const {
  const std::size_t dim = images.size() / size();
  return Tensor(sample_shape(), std::vector<Real>(images.ptr() + i * dim, images.ptr() + (i + 1) * dim));
}

Dataset Dataset::select(const std::vector<std::size_t>& indices) const {
  Batch b = make_batch(*this, indices);
  return {std::move(b.x), std::move(b.labels), split, class_count};
}

Dataset Dataset::head(std::size_t n) const {
  if (n == 0 || n >= size()) return *this;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return select(idx);
}

void Dataset::validate() const {
  if (images.rank() != 4 || images.dim(0) != labels.size()) {
    throw DataError(DataError::Kind::CountMismatch,
                    "images " + shape_str(images.shape()) + " vs " + std::to_string(labels.size()) +
                        " labels");
  }
  for (std::size_t l : labels) {
    if (l >= class_count) {
      throw DataError(DataError::Kind::BadLabel, "label " + std::to_string(l) + " out of range");
    }
  }
  for (Real v : images.data()) {
    if (!(v >= 0 && v <= 1)) throw DataError(DataError::Kind::BadPixel, "pixel outside [0,1]");
  }
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::string split) {
  Idx im = parse(images, kImageMagic, 3);
  Idx lb = parse(labels, kLabelMagic, 1);
  const std::size_t n = im.dims[0], h = im.dims[1], w = im.dims[2];
  if (lb.dims[0] != n) {
    throw DataError(DataError::Kind::CountMismatch,
                    std::to_string(n) + " images but " + std::to_string(lb.dims[0]) + " labels");
  }
  Dataset ds;
  ds.split = std::move(split);
  ds.images = Tensor({n, 1, h, w});
  Real* dst = ds.images.ptr();
  for (std::size_t i = 0; i < n * h * w; ++i) dst[i] = Real(im.bytes[im.offset + i]) / Real(255);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = lb.bytes[lb.offset + i];
  for (std::size_t l : ds.labels) {
    if (l >= ds.class_count) {
      throw DataError(DataError::Kind::BadLabel, "label " + std::to_string(l) + " in " + labels.string());
    }
  }
  return ds;
}

void save_idx(const Dataset& ds, const std::filesystem::path& images,
              const std::filesystem::path& labels) {
  if (ds.images.rank() != 4 || ds.images.dim(1) != 1) {
    throw ContractViolation("save_idx: single-channel (N,1,H,W) images only");
  }
  const std::size_t n = ds.size(), h = ds.images.dim(2), w = ds.images.dim(3);
  std::ofstream im(images, std::ios::binary), lb(labels, std::ios::binary);
  if (!im || !lb) throw DataError(DataError::Kind::Missing, "cannot write IDX files");
  put_be32(im, kImageMagic);
  put_be32(im, std::uint32_t(n));
  put_be32(im, std::uint32_t(h));
  put_be32(im, std::uint32_t(w));
  for (Real v : ds.images.data()) im.put(char(std::lround(double(v) * 255)));
  put_be32(lb, kLabelMagic);
  put_be32(lb, std::uint32_t(n));
  for (std::size_t l : ds.labels) lb.put(char(l));
}

Dataset load_mnist_split(const std::filesystem::path& dir, const std::string& split) {
  const std::string prefix = split == "test" ? "t10k" : "train";
  auto find = [&](const std::string& stem) {
    for (const char* ext : {"", ".gz"}) {
      auto p = dir / (stem + ext);
      if (std::filesystem::exists(p)) return p;
    }
    throw DataError(DataError::Kind::Missing, "missing " + (dir / stem).string() + "[.gz]");
  };
  return load_idx(find(prefix + "-images-idx3-ubyte"), find(prefix + "-labels-idx1-ubyte"), split);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch,
                                                    bool shuffle) {
  if (batch_size < 1) throw ContractViolation("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) {
    Rng rng = derive_rng(seed, 0x5348554646ULL, epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size) {
    out.emplace_back(order.begin() + i, order.begin() + std::min(n, i + batch_size));
  }
  return out;
}

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices) {
  const std::size_t dim = ds.images.size() / std::max<std::size_t>(ds.size(), 1);
  Shape s = ds.images.shape();
  s[0] = indices.size();
  Batch b{Tensor(s), {}, indices};
  b.labels.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t i = indices[j];
    if (i >= ds.size()) throw ContractViolation("batch index out of range");
    std::copy_n(ds.images.ptr() + i * dim, dim, b.x.ptr() + j * dim);
    b.labels.push_back(ds.labels[i]);
  }
  return b;
}

std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                           bool shuffle, std::size_t epoch) {
  std::vector<Batch> out;
  for (const auto& idx : epoch_batches(ds.size(), batch_size, seed, epoch, shuffle)) {
    out.push_back(make_batch(ds, idx));
  }
  return out;
}

Dataset synthetic_blobs(std::size_t n, std::size_t classes, std::uint64_t seed, std::size_t side) {
  if (classes < 2 || classes > 4) throw ContractViolation("synthetic_blobs: 2..4 classes");
  if (side < 8) throw ContractViolation("synthetic_blobs: side must be >= 8");
  Rng rng = derive_rng(seed, 0x424c4f42ULL);
  Dataset ds;
  ds.split = "synthetic";
  ds.class_count = classes;
  ds.images = Tensor({n, 1, side, side});
  ds.labels.resize(n);
  const std::size_t half = side / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    ds.labels[i] = c;
    Real* img = ds.images.ptr() + i * side * side;
    for (std::size_t p = 0; p < side * side; ++p) img[p] = Real(uniform_index(rng, 40)) / 255;
    const std::size_t r0 = (c / 2) * half + (half - 3) / 2, c0 = (c % 2) * half + (half - 3) / 2;
    for (std::size_t r = r0; r < r0 + 3; ++r) {
      for (std::size_t q = c0; q < c0 + 3; ++q) img[r * side + q] = Real(200 + uniform_index(rng, 56)) / 255;
    }
  }
  return ds;
}

}  // namespace artk
