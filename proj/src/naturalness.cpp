#include "metaod/naturalness.hpp"

#include <algorithm>
#include <cmath>

#include "metaod/errors.hpp"

namespace metaod {

namespace {

constexpr int kCellSize = 8;
constexpr int kBins = 9;
constexpr double kBinWidthDeg = 180.0 / kBins;
constexpr double kBlockNormEps = 1e-6;

std::vector<double> grayscale(const ImageBuffer& image) {
  std::vector<double> gray(static_cast<std::size_t>(image.width) * image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const std::uint8_t* px = image.at(x, y);
      const double a = px[3] / 255.0;
      gray[static_cast<std::size_t>(y) * image.width + x] =
          (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) * a;
    }
  return gray;
}

}  // namespace

HOGDescriptor hog(const ImageBuffer& image) {
  if (image.width < 2 * kCellSize || image.height < 2 * kCellSize)
    throw Error("hog needs at least a 16x16 image");

  const int w = image.width;
  const int h = image.height;
  const std::vector<double> gray = grayscale(image);
  const auto at = [&](int x, int y) {
    return gray[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w +
                std::clamp(x, 0, w - 1)];
  };

  HOGDescriptor desc;
  desc.cells_x = w / kCellSize;
  desc.cells_y = h / kCellSize;

  // Magnitude-weighted linear votes into 9 unsigned bins per 8x8 cell.
  std::vector<double> cells(
      static_cast<std::size_t>(desc.cells_x) * desc.cells_y * kBins, 0.0);
  for (int y = 0; y < desc.cells_y * kCellSize; ++y) {
    const int cy = y / kCellSize;
    for (int x = 0; x < desc.cells_x * kCellSize; ++x) {
      const int cx = x / kCellSize;
      // Central differences with replicated borders.
      const double gx = (at(x + 1, y) - at(x - 1, y)) / 2.0;
      const double gy = (at(x, y + 1) - at(x, y - 1)) / 2.0;
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double deg = std::atan2(gy, gx) * 180.0 / M_PI;
      if (deg < 0.0) deg += 180.0;
      if (deg >= 180.0) deg -= 180.0;

      const double pos = deg / kBinWidthDeg - 0.5;
      const int lo = static_cast<int>(std::floor(pos));
      const double frac = pos - lo;
      const int bin0 = (lo % kBins + kBins) % kBins;
      const int bin1 = (bin0 + 1) % kBins;
      double* cell =
          &cells[(static_cast<std::size_t>(cy) * desc.cells_x + cx) * kBins];
      cell[bin0] += mag * (1.0 - frac);
      cell[bin1] += mag * frac;
    }
  }

  // 2x2-cell blocks, stride one cell, L2 norm.
  const int blocks_x = desc.cells_x - 1;
  const int blocks_y = desc.cells_y - 1;
  desc.values.resize(static_cast<std::size_t>(blocks_x) * blocks_y * 4 * kBins);
  std::size_t out = 0;
  for (int by = 0; by < blocks_y; ++by)
    for (int bx = 0; bx < blocks_x; ++bx) {
      double sumsq = 0.0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const double* cell =
              &cells[(static_cast<std::size_t>(by + dy) * desc.cells_x + bx + dx) *
                     kBins];
          for (int b = 0; b < kBins; ++b) sumsq += cell[b] * cell[b];
        }
      const double norm = std::sqrt(sumsq + kBlockNormEps * kBlockNormEps);
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const double* cell =
              &cells[(static_cast<std::size_t>(by + dy) * desc.cells_x + bx + dx) *
                     kBins];
          for (int b = 0; b < kBins; ++b) desc.values[out++] = cell[b] / norm;
        }
    }
  return desc;
}

double hog_intersection(const HOGDescriptor& a, const HOGDescriptor& b) {
  if (a.cells_x != b.cells_x || a.cells_y != b.cells_y ||
      a.values.size() != b.values.size())
    throw Error("hog_intersection: descriptor geometry mismatch");

  // Identical descriptors (identical images) score exactly 1; the summation
  // below would land within a few ulps instead. Also covers two all-zero
  // descriptors.
  if (a.values == b.values) return 1.0;

  double sum_a = 0.0, sum_b = 0.0;
  for (double v : a.values) sum_a += v;
  for (double v : b.values) sum_b += v;
  if (sum_a == 0.0 || sum_b == 0.0) return 0.0;

  double inter = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    inter += std::min(a.values[i] / sum_a, b.values[i] / sum_b);
  return inter;
}

}  // namespace metaod
