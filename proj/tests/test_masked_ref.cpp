// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include <doctest.h>

#include "desmoke/error.hpp"
#include "desmoke/masked_ref.hpp"
#include "test_util.hpp"

using namespace desmoke;

namespace {

Tensor dark_channel_oracle(const Tensor& img, int window) {
  const int r = window / 2;
  Tensor out(Shape{1, 1, img.h(), img.w()});
  for (int y = 0; y < img.h(); ++y)
    for (int x = 0; x < img.w(); ++x) {
      double m = 1e300;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          for (int c = 0; c < img.c(); ++c)
            m = std::min(m, img.at(0, c, std::clamp(y + dy, 0, img.h() - 1),
                                   std::clamp(x + dx, 0, img.w() - 1)));
      out.at(0, 0, y, x) = m;
    }
  return out;
}

// Pair of single-channel maps whose agreement varies per trial, so masks
// contain both kept and rejected patches.
std::pair<Tensor, Tensor> graded_pair(std::mt19937_64& rng, int h, int w) {
  const Tensor a = testutil::smooth_image(h, w, rng, 1);
  std::uniform_real_distribution<double> sd(0.0, 0.12);
  std::normal_distribution<double> noise(0.0, 1.0);
  Tensor b = a;
  const int P = 8;
  for (int r = 0; r < (h + P - 1) / P; ++r)
    for (int c = 0; c < (w + P - 1) / P; ++c) {
      const double s = sd(rng);
      for (int y = r * P; y < std::min(h, (r + 1) * P); ++y)
        for (int x = c * P; x < std::min(w, (c + 1) * P); ++x)
          b.at(0, 0, y, x) = std::clamp(a.at(0, 0, y, x) + s * noise(rng), 0.0, 1.0);
    }
  return {a, b};
}

}  // namespace

TEST_CASE("dark channel matches the brute-force window minimum") {
  std::mt19937_64 rng(21);
  for (int window : {1, 3, 15}) {
    const Tensor img = testutil::random_tensor(Shape{1, 3, 20, 24}, rng);
    CHECK(max_abs_diff(dark_channel(img, window), dark_channel_oracle(img, window)) == 0.0);
  }
  CHECK_THROWS_AS(dark_channel(Tensor(Shape{1, 3, 16, 16}), 4), Error);
}

TEST_CASE("gaussian kernel is normalized and symmetric") {
  const auto k = gaussian_kernel_1d(21, 5.0);
  REQUIRE(k.size() == 21);
  double s = 0.0;
  for (double v : k) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(k[3] == doctest::Approx(k[17]).epsilon(1e-15));
  CHECK(k[10] / k[11] == doctest::Approx(std::exp(1.0 / 50.0)));

  // a constant map is a fixed point of the blur
  const Tensor flat(Shape{1, 1, 16, 16}, 0.37);
  CHECK(max_abs_diff(gaussian_blur(flat, 21, 5.0), flat) <= 1e-14);
}

TEST_CASE("global ssim matches the population-statistics formula") {
  std::mt19937_64 rng(22);
  const Tensor a = testutil::random_tensor(Shape{1, 1, 8, 8}, rng);
  const Tensor b = testutil::random_tensor(Shape{1, 1, 8, 8}, rng);
  CHECK(global_ssim(a.span(), b.span()) ==
        doctest::Approx(testutil::ssim_reference(a.vec(), b.vec())).epsilon(1e-12));
  CHECK(global_ssim(a.span(), a.span()) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("patch SSIM mask matches the per-patch reference") {
  std::mt19937_64 rng(23);
  std::size_t ones = 0, total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int h = trial % 2 ? 36 : 32, w = trial % 3 ? 44 : 40;  // some partial patches
    auto [a, b] = graded_pair(rng, h, w);
    int rows = 0, cols = 0;
    const auto expect = testutil::patch_mask_reference(a, b, 8, 0.92, &rows, &cols);
    const PatchMask m = patch_ssim_mask_preprocessed(a, b, 8, 0.92);
    CHECK(m.rows == rows);
    CHECK(m.cols == cols);
    CHECK(m.data == expect);
    ones += m.count_ones();
    total += m.data.size();
  }
  CHECK(ones > 0);
  CHECK(ones < total);
}

TEST_CASE("identical inputs keep every patch") {
  std::mt19937_64 rng(24);
  const Tensor img = testutil::smooth_image(32, 32, rng);
  MaskGenConfig cfg;
  const PatchMask m = patch_ssim_mask(img, img, cfg);
  CHECK(m.count_ones() == m.data.size());
  cfg.preprocess = MaskPreprocess::DcpDehaze;
  CHECK(patch_ssim_mask(img, img, cfg).count_ones() == m.data.size());
}

TEST_CASE("unrelated content is rejected") {
  std::mt19937_64 rng(25);
  const Tensor a = testutil::random_tensor(Shape{1, 3, 32, 32}, rng);
  const Tensor b = testutil::random_tensor(Shape{1, 3, 32, 32}, rng);
  MaskGenConfig cfg;
  cfg.blur_kernel = 1;
  cfg.dcp_window = 1;
  CHECK(patch_ssim_mask(a, b, cfg).count_ones() == 0);
}

TEST_CASE("mask expansion onto the feature grid") {
  PatchMask m(2, 3, 8, 0);
  m.at(0, 1) = 1;
  m.at(1, 2) = 1;
  const Tensor e = expand_mask(m, 4, 6, 4);  // 16x24 image at stride 4
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) {
      const double expect = m.at(y / 2, x / 2);
      CHECK(e.at(0, 0, y, x) == expect);
    }
  CHECK_THROWS_AS(expand_mask(m, 5, 6, 4), Error);

  std::mt19937_64 rng(26);
  const Tensor f = testutil::random_tensor(Shape{2, 3, 4, 6}, rng);
  const Tensor g = mask_features(f, m, 4);
  CHECK(g.at(1, 2, 0, 2) == f.at(1, 2, 0, 2));
  CHECK(g.at(1, 2, 0, 0) == 0.0);
}

TEST_CASE("dcp dehaze leaves haze-free images alone") {
  std::mt19937_64 rng(27);
  // a zero channel means dark channel 0, so t = 1 everywhere
  Tensor clear = testutil::random_tensor(Shape{1, 3, 16, 16}, rng);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) clear.at(0, 2, y, x) = 0.0;
  CHECK(max_abs_diff(dcp_dehaze(clear, 15), clear) <= 1e-12);

  // output stays in range on arbitrary input
  const Tensor j = dcp_dehaze(testutil::random_tensor(Shape{1, 3, 16, 16}, rng), 7);
  for (double v : j.vec()) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("mask config validation and preprocess names") {
  MaskGenConfig cfg;
  cfg.epsilon = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(parse_mask_preprocess("dcp_dehaze") == MaskPreprocess::DcpDehaze);
  CHECK(mask_preprocess_name(MaskPreprocess::DarkChannel) == "dark_channel");
  CHECK_THROWS_AS(parse_mask_preprocess("none"), Error);
}

TEST_CASE("generate_mask aligns the reference before comparing") {
  std::mt19937_64 rng(28);
  const Tensor ref = testutil::smooth_image(32, 32, rng);
  const BlockMatchingBackend bm(8, 4);
  const MaskResult r = generate_mask(ref, ref, bm, MaskGenConfig{});
  CHECK(r.flow.abs_max() == 0.0);
  CHECK(max_abs_diff(r.warped_ref, ref) == 0.0);
  CHECK(r.mask.count_ones() == 16);
}

TEST_CASE("dark channel of constant images") {
  CHECK(max_abs_diff(dark_channel(Tensor(Shape{1, 3, 16, 16}, 0.5), 15),
                     Tensor(Shape{1, 1, 16, 16}, 0.5)) == 0.0);
  Tensor img(Shape{1, 3, 16, 16}, 0.7);
  img.at(0, 1, 4, 9) = 0.0;
  const Tensor d = dark_channel(img, 1);
  CHECK(d.at(0, 0, 4, 9) == 0.0);
  CHECK(d.at(0, 0, 4, 10) == 0.7);
}

TEST_CASE("gaussian blur: impulse response and semigroup property") {
  Tensor imp(Shape{1, 1, 9, 9});
  imp.at(0, 0, 4, 4) = 1.0;
  const auto k = gaussian_kernel_1d(3, 1.0);
  const double e = std::exp(-0.5);
  CHECK(k[1] == doctest::Approx(1.0 / (1.0 + 2.0 * e)).epsilon(1e-14));
  CHECK(gaussian_blur(imp, 3, 1.0).at(0, 0, 4, 4) == doctest::Approx(k[1] * k[1]).epsilon(1e-14));

  // smooth input far from borders: blur(s) twice ~ blur(s*sqrt2) once
  const int N = 64;
  Tensor img(Shape{1, 1, N, N});
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x)
      img.at(0, 0, y, x) = 0.5 + 0.3 * std::sin(0.15 * x) * std::cos(0.11 * y);
  const Tensor twice = gaussian_blur(gaussian_blur(img, 25, 2.0), 25, 2.0);
  const Tensor once = gaussian_blur(img, 35, 2.0 * std::sqrt(2.0));
  double worst = 0.0;
  for (int y = 20; y < N - 20; ++y)
    for (int x = 20; x < N - 20; ++x)
      worst = std::max(worst, std::abs(twice.at(0, 0, y, x) - once.at(0, 0, y, x)));
  CHECK(worst <= 1e-3);
}

TEST_CASE("a noise patch is the only rejected patch") {
  std::mt19937_64 rng(29);
  const Tensor a = testutil::smooth_image(32, 32, rng, 1);
  Tensor b = a;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int y = 8; y < 16; ++y)
    for (int x = 16; x < 24; ++x) b.at(0, 0, y, x) = u(rng);
  const PatchMask m = patch_ssim_mask_preprocessed(a, b, 8, 0.92);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(m.at(r, c) == ((r == 1 && c == 2) ? 0 : 1));
}

TEST_CASE("SSIM exactly at the threshold is rejected") {
  std::mt19937_64 rng(30);
  const Tensor a = testutil::random_tensor(Shape{1, 1, 8, 8}, rng);
  const Tensor b = testutil::random_tensor(Shape{1, 1, 8, 8}, rng);
  const double s = global_ssim(a.span(), b.span());
  CHECK(patch_ssim_mask_preprocessed(a, b, 8, s).count_ones() == 0);
  CHECK(patch_ssim_mask_preprocessed(a, b, 8, std::nextafter(s, -1.0)).count_ones() == 1);
}

TEST_CASE("generate_mask: shifted reference kept, unseen instrument rejected") {
  std::mt19937_64 rng(31);
  const Tensor smoky = testutil::smooth_image(48, 48, rng);
  Tensor ref(smoky.shape());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x) ref.at(0, c, y, x) = smoky.at(0, c, y, std::max(0, x - 2));
  MaskGenConfig cfg;
  const BlockMatchingBackend bm(8, 3);
  // the right border block cannot be matched, and the dark-channel window
  // plus blur carry that error about 17 px inward
  const PatchMask shifted = generate_mask(ref, smoky, bm, cfg).mask;
  for (int r = 1; r < 5; ++r)
    for (int c = 1; c < 4; ++c) CHECK(shifted.at(r, c) == 1);

  // a 16 px dark blob present only in the reference
  Tensor blob = smoky;
  for (int c = 0; c < 3; ++c)
    for (int y = 16; y < 32; ++y)
      for (int x = 16; x < 32; ++x) blob.at(0, c, y, x) = 0.05 + 0.02 * ((x + y) % 3);
  cfg.preprocess = MaskPreprocess::DcpDehaze;
  const PatchMask m = generate_mask(blob, smoky, bm, cfg).mask;
  for (int r = 2; r < 4; ++r)
    for (int c = 2; c < 4; ++c) CHECK(m.at(r, c) == 0);

  // the 15 px dark-channel window erodes an object this small away entirely
  cfg.preprocess = MaskPreprocess::DarkChannel;
  const PatchMask eroded = generate_mask(blob, smoky, bm, cfg).mask;
  for (int r = 2; r < 4; ++r)
    for (int c = 2; c < 4; ++c) CHECK(eroded.at(r, c) == 1);
}

TEST_CASE("feature masking: all ones, all zeros, one patch") {
  std::mt19937_64 rng(32);
  const Tensor f = testutil::random_tensor(Shape{1, 5, 4, 4}, rng);
  CHECK(mask_features(f, PatchMask(2, 2, 8, 1)).vec() == f.vec());
  CHECK(mask_features(f, PatchMask(2, 2, 8, 0)).abs_max() == 0.0);
  PatchMask one(2, 2, 8, 1);
  one.at(0, 1) = 0;
  const Tensor g = mask_features(f, one);
  for (int c = 0; c < 5; ++c)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x)
        CHECK(g.at(0, c, y, x) == ((y < 2 && x >= 2) ? 0.0 : f.at(0, c, y, x)));
}
