#pragma once

#include <vector>

#include "metaod/geometry.hpp"

namespace metaod {

/// Dalal-Triggs histogram of oriented gradients: 8x8-pixel cells, 9 unsigned
/// orientation bins, 2x2-cell blocks at stride 1, block-wise L2 norm.
/// Layout: blocks row-major by (block_y, block_x), then the block's 4 cells
/// row-major, then 9 bins. Length = (cells_x-1) * (cells_y-1) * 36.
struct HOGDescriptor {
  int cells_x = 0;
  int cells_y = 0;
  std::vector<double> values;
};

/// Requires width and height >= 16 (at least 2x2 cells); trailing partial
/// cells are discarded.
HOGDescriptor hog(const ImageBuffer& image);

/// Histogram intersection of L1-normalized descriptors, in [0, 1]. Two
/// all-zero descriptors (identical constant images) score 1. Throws on
/// geometry mismatch.
double hog_intersection(const HOGDescriptor& a, const HOGDescriptor& b);

}  // namespace metaod
