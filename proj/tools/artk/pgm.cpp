#include "pgm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "artk/data.hpp"

namespace artk::cli {

namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& px,
                 std::size_t h, std::size_t w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::Missing, "cannot write " + path.string());
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), std::streamsize(px.size()));
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Real* values, std::size_t h, std::size_t w) {
  std::vector<unsigned char> px(h * w);
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = std::clamp(double(values[i]), 0.0, 1.0);
    px[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  write_bytes(path, px, h, w);
}

void write_pgm_normalized(const std::filesystem::path& path, const std::vector<Real>& values,
                          std::size_t h, std::size_t w) {
  std::vector<unsigned char> px(h * w, 0);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (lo != values.end() && *hi > *lo) {
    const double span = double(*hi) - double(*lo);
    for (std::size_t i = 0; i < px.size(); ++i) {
      px[i] = static_cast<unsigned char>(std::lround((double(values[i]) - double(*lo)) / span * 255.0));
    }
  }
  write_bytes(path, px, h, w);
}

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::Missing, "cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    in >> t;
    return t;
  };
  if (token() != "P5") throw DataError(DataError::Kind::BadMagic, path.string() + ": not a binary PGM");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::logic_error&) {
    throw DataError(DataError::Kind::Truncated, path.string() + ": bad PGM header");
  }
  if (maxval == 0 || maxval > 255 || w == 0 || h == 0) {
    throw DataError(DataError::Kind::BadPixel, path.string() + ": unsupported PGM maxval or size");
  }
  in.get();  // the single whitespace byte before the raster
  std::vector<unsigned char> px(w * h);
  in.read(reinterpret_cast<char*>(px.data()), std::streamsize(px.size()));
  if (in.gcount() != std::streamsize(px.size())) {
    throw DataError(DataError::Kind::Truncated, path.string() + ": truncated PGM raster");
  }
  Tensor t({1, 1, h, w});
  for (std::size_t i = 0; i < px.size(); ++i) t.data()[i] = Real(px[i]) / Real(maxval);
  return t;
}

void write_csv(const std::filesystem::path& path, const std::vector<Real>& values, std::size_t h,
               std::size_t w) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError(DataError::Kind::Missing, "cannot write " + path.string());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      std::fprintf(f, c ? ",%.17g" : "%.17g", double(values[r * w + c]));
    }
    std::fputc('\n', f);
  }
  std::fclose(f);
}

std::vector<double> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::Missing, "cannot open " + path.string());
  std::vector<double> out;
  std::string line, cell;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  }
  return out;
}

}  // namespace artk::cli
