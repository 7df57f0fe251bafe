#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "metaod/errors.hpp"
#include "metaod/insertion.hpp"
#include "metaod/naturalness.hpp"
#include "support/images.hpp"

using namespace metaod;
using metaod::testing::ellipse_object;
using metaod::testing::noise_image;
using metaod::testing::textured_background;

TEST_CASE("constant image gives an all-zero descriptor") {
  const HOGDescriptor d = hog(ImageBuffer::filled(32, 32, 90, 90, 90));
  CHECK(d.cells_x == 4);
  CHECK(d.cells_y == 4);
  CHECK(d.values.size() == 3u * 3u * 36u);
  for (double v : d.values) CHECK(v == 0.0);
}

TEST_CASE("descriptor geometry discards partial cells") {
  const HOGDescriptor d = hog(noise_image(37, 21, 3));
  CHECK(d.cells_x == 4);
  CHECK(d.cells_y == 2);
  CHECK(d.values.size() == 3u * 1u * 36u);
  for (double v : d.values) CHECK(v >= 0.0);
}

TEST_CASE("images smaller than 16x16 are rejected") {
  CHECK_THROWS_AS(hog(noise_image(15, 40, 1)), Error);
  CHECK_THROWS_AS(hog(noise_image(40, 15, 1)), Error);
}

TEST_CASE("vertical step edge votes into the horizontal-gradient bins") {
  // Left dark, right bright: gradient points along +x, orientation 0 deg,
  // which splits between the two bins adjacent to 0 (bins 0 and 8).
  ImageBuffer img = ImageBuffer::filled(64, 64, 40, 40, 40);
  for (int y = 0; y < 64; ++y)
    for (int x = 32; x < 64; ++x) {
      img.at(x, y)[0] = 200;
      img.at(x, y)[1] = 200;
      img.at(x, y)[2] = 200;
    }
  const HOGDescriptor d = hog(img);
  double edge_bins = 0.0, other_bins = 0.0, total = 0.0;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    const int bin = static_cast<int>(i % 9);
    total += d.values[i];
    (bin == 0 || bin == 8 ? edge_bins : other_bins) += d.values[i];
  }
  CHECK(total > 0.0);
  CHECK(edge_bins / total > 0.99);
  CHECK(other_bins / total < 0.01);

  // The edge is uniform down the image: block rows carry equal energy.
  const int blocks_x = d.cells_x - 1;
  std::vector<double> row_energy(d.cells_y - 1, 0.0);
  for (int by = 0; by < d.cells_y - 1; ++by)
    for (int bx = 0; bx < blocks_x; ++bx)
      for (int k = 0; k < 36; ++k)
        row_energy[by] += d.values[(static_cast<std::size_t>(by) * blocks_x + bx) * 36 + k];
  for (std::size_t r = 1; r < row_energy.size(); ++r)
    CHECK(row_energy[r] == doctest::Approx(row_energy[0]).epsilon(1e-9));
}

TEST_CASE("photometric scaling cancels after block normalization") {
  // Pixel values chosen even so halving is exact in uint8.
  ImageBuffer img = noise_image(48, 40, 9);
  for (auto& v : img.pixels) v &= 0xFE;
  ImageBuffer half = img;
  for (std::size_t i = 0; i < half.pixels.size(); ++i)
    if (i % 4 != 3) half.pixels[i] /= 2;
  const HOGDescriptor a = hog(img);
  const HOGDescriptor b = hog(half);
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-4));
}

TEST_CASE("intersection identity, symmetry, bounds") {
  const HOGDescriptor a = hog(textured_background(96, 80, 1));
  const HOGDescriptor b = hog(textured_background(96, 80, 2));
  CHECK(hog_intersection(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hog_intersection(a, b) == doctest::Approx(hog_intersection(b, a)).epsilon(1e-12));
  const double v = hog_intersection(a, b);
  CHECK(v >= 0.0);
  CHECK(v <= 1.0 + 1e-12);
}

TEST_CASE("two constant images intersect at 1") {
  const HOGDescriptor a = hog(ImageBuffer::filled(32, 32, 10, 10, 10));
  const HOGDescriptor b = hog(ImageBuffer::filled(32, 32, 200, 200, 200));
  CHECK(hog_intersection(a, b) == 1.0);
}

TEST_CASE("geometry mismatch is rejected") {
  const HOGDescriptor a = hog(noise_image(32, 32, 1));
  const HOGDescriptor b = hog(noise_image(40, 32, 1));
  CHECK_THROWS_AS(hog_intersection(a, b), Error);
}

TEST_CASE("orthogonal stripe patterns barely intersect") {
  ImageBuffer horizontal = ImageBuffer::filled(64, 64, 30, 30, 30);
  ImageBuffer vertical = ImageBuffer::filled(64, 64, 30, 30, 30);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      if (y / 4 % 2 == 0) {
        auto* p = horizontal.at(x, y);
        p[0] = p[1] = p[2] = 220;
      }
      if (x / 4 % 2 == 0) {
        auto* p = vertical.at(x, y);
        p[0] = p[1] = p[2] = 220;
      }
    }
  CHECK(hog_intersection(hog(horizontal), hog(vertical)) < 0.2);
}

TEST_CASE("small insertions keep high intersection with the background") {
  int checked = 0;
  double total = 0.0;
  for (int i = 0; i < 20; ++i) {
    const ImageBuffer bg = textured_background(160, 120, 100 + i);
    ObjectInstance obj = ellipse_object(24, 20, 200 + i, "thing");  // 2.5% of frame
    const Placement p{{40.0 + 4 * i, 60.0}, 1.0, obj.id, std::nullopt,
                      PlacementMode::kGuided};
    const ImageBuffer synth = composite(bg, obj, p);
    const double v = hog_intersection(hog(synth), hog(bg));
    total += v;
    ++checked;
    CHECK(v > 0.85);
  }
  CHECK(total / checked >= 0.95);
}

TEST_CASE("larger insertions never raise expected intersection") {
  // Statistical monotonicity over three area tiers.
  const int samples = 200;
  double means[3] = {0, 0, 0};
  const int sizes[3][2] = {{12, 10}, {28, 24}, {56, 48}};
  for (int tier = 0; tier < 3; ++tier) {
    Rng rng(40 + tier);
    double sum = 0.0;
    for (int i = 0; i < samples; ++i) {
      const ImageBuffer bg = textured_background(128, 96, 500 + i);
      ObjectInstance obj =
          ellipse_object(sizes[tier][0], sizes[tier][1], 900 + i, "thing");
      const Placement p = sample_random(DetectionSet{}, obj, 128, 96, rng);
      const ImageBuffer synth = composite(bg, obj, p);
      sum += hog_intersection(hog(synth), hog(bg));
    }
    means[tier] = sum / samples;
  }
  CHECK(means[0] > means[1]);
  CHECK(means[1] > means[2]);
}
