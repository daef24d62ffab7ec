// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "desmoke/error.hpp"
#include "desmoke/eval.hpp"
#include "desmoke/smoke_sim.hpp"
#include "test_util.hpp"

using namespace desmoke;

namespace {

// Dense windowed SSIM: 11x11 Gaussian (sigma 1.5) over every window that
// fits inside the image and the valid region.
double ssim_oracle(const Tensor& a, const Tensor& b, const Tensor* valid = nullptr) {
  const int K = 11;
  double g[K], s = 0.0;
  for (int i = 0; i < K; ++i) s += g[i] = std::exp(-((i - 5.0) * (i - 5.0)) / (2 * 1.5 * 1.5));
  for (double& v : g) v /= s;
  const double C1 = 1e-4, C2 = 9e-4;
  double total = 0.0;
  int count = 0;
  for (int y = 0; y + K <= a.h(); ++y)
    for (int x = 0; x + K <= a.w(); ++x) {
      bool ok = true;
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int u = 0; u < K; ++u)
        for (int v = 0; v < K; ++v) {
          if (valid && valid->at(0, 0, y + u, x + v) != 1.0) ok = false;
          const double w = g[u] * g[v], pa = a.at(0, 0, y + u, x + v), pb = b.at(0, 0, y + u, x + v);
          ma += w * pa;
          mb += w * pb;
          saa += w * pa * pa;
          sbb += w * pb * pb;
          sab += w * pa * pb;
        }
      if (!ok) continue;
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
      ++count;
    }
  return count ? total / count : std::nan("");
}

Frame shifted(const Frame& f, int dx) {
  Tensor t(f.tensor().shape());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x)
        t.at(0, c, y, x) = f.at(c, y, std::clamp(x - dx, 0, f.width() - 1));
  return Frame(t);
}

}  // namespace

TEST_CASE("psnr: cap, uniform error and undefined") {
  std::mt19937_64 rng(61);
  const Frame f = testutil::random_frame(32, 32, rng);
  const BlockMatchingBackend bm(8, 4);
  CHECK(aligned_psnr(f, f, bm) == 100.0);

  const Tensor a(Shape{1, 3, 16, 16}, 0.3), b(Shape{1, 3, 16, 16}, 0.4);
  const Tensor ones(Shape{1, 1, 16, 16}, 1.0);
  CHECK(masked_psnr(a, b, ones) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(masked_psnr(a, a, ones) == 100.0);
  try {
    masked_psnr(a, b, Tensor(Shape{1, 1, 16, 16}));
    FAIL("expected Undefined");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Undefined);
  }
  // only valid pixels count
  Tensor c = a;
  Tensor half(Shape{1, 1, 16, 16});
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 8; ++x) {
      half.at(0, 0, y, x) = 1.0;
      for (int ch = 0; ch < 3; ++ch) c.at(0, ch, y, x + 8) = 1.0;
    }
  CHECK(masked_psnr(c, a, half) == 100.0);
}

TEST_CASE("aligned psnr forgives a global shift") {
  std::mt19937_64 rng(62);
  const Frame target(testutil::smooth_image(48, 48, rng));
  Tensor noisy_t = target.tensor();
  std::normal_distribution<double> nd(0.0, 0.02);
  for (double& v : noisy_t.vec()) v = std::clamp(v + nd(rng), 0.0, 1.0);
  const Frame noisy(noisy_t);
  const BlockMatchingBackend bm(8, 4);
  const double unshifted = aligned_psnr(noisy, target, bm);
  const double moved = aligned_psnr(shifted(noisy, 2), target, bm);
  CHECK(std::abs(unshifted - moved) <= 0.1);
  CHECK(unshifted > 30.0);
}

TEST_CASE("ssim matches the dense windowed oracle") {
  std::mt19937_64 rng(63);
  const Tensor t = testutil::smooth_image(32, 40, rng, 1);
  Tensor inv = t;
  for (double& v : inv.vec()) v = 1.0 - v;
  const Tensor ones(Shape{1, 1, 32, 40}, 1.0);
  const double s = masked_ssim(t, inv, ones);
  CHECK(s < 1.0);
  CHECK(s == doctest::Approx(ssim_oracle(t, inv)).epsilon(1e-10));
  CHECK(masked_ssim(t, t, ones) == doctest::Approx(1.0).epsilon(1e-12));

  // validity holes remove every window touching them
  Tensor valid = ones;
  for (int y = 10; y < 14; ++y)
    for (int x = 0; x < 40; ++x) valid.at(0, 0, y, x) = 0.0;
  const Tensor noise = testutil::random_tensor(Shape{1, 1, 32, 40}, rng);
  CHECK(masked_ssim(t, noise, valid) ==
        doctest::Approx(ssim_oracle(t, noise, &valid)).epsilon(1e-10));

  CHECK_THROWS_AS(masked_ssim(t, t, Tensor(Shape{1, 1, 32, 40})), Error);
}

TEST_CASE("ssim of constant images reduces to the luminance term") {
  const Tensor a(Shape{1, 1, 16, 16}, 0.4), b(Shape{1, 1, 16, 16}, 0.5);
  const double C1 = 1e-4;
  const double expect = (2 * 0.4 * 0.5 + C1) / (0.16 + 0.25 + C1);
  CHECK(masked_ssim(a, b, Tensor(Shape{1, 1, 16, 16}, 1.0)) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("luminance uses BT.601 weights") {
  Tensor rgb(Shape{1, 3, 16, 16});
  for (int i = 0; i < 256; ++i) {
    rgb.plane(0, 0)[i] = 1.0;
    rgb.plane(0, 2)[i] = 0.5;
  }
  CHECK(luminance(rgb).at(0, 0, 3, 3) == doctest::Approx(0.299 + 0.114 * 0.5));
}

TEST_CASE("density proxy") {
  Tensor air(Shape{1, 3, 32, 32});
  for (int i = 0; i < 1024; ++i) {
    air.plane(0, 0)[i] = 0.85;
    air.plane(0, 1)[i] = 0.85;
    air.plane(0, 2)[i] = 0.88;
  }
  CHECK(smoke_density_proxy(Frame(air)) == doctest::Approx(0.85));
  Tensor zero = air;
  for (int i = 0; i < 1024; ++i) zero.plane(0, 1)[i] = 0.0;
  CHECK(smoke_density_proxy(Frame(zero)) == 0.0);
}

TEST_CASE("smoke raises the density proxy on synthesized pairs") {
  int higher = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    SceneParams sp;
    sp.seed = seed;
    const Clip clean = synth_clean_clip(sp);
    SmokeParams p;
    p.density_peak = 0.3;
    p.seed = seed;
    const Clip smoky = synth_smoke(clean, p);
    for (std::size_t k = 0; k < smoky.size(); ++k) {
      // frames at the profile's zero points carry no smoke at all
      if (temporal_profile(p, static_cast<int>(k) + 2) == 0.0) continue;
      ++total;
      higher += smoke_density_proxy(smoky.frame(k)) > smoke_density_proxy(clean.frame(k + 1));
    }
  }
  REQUIRE(total > 0);
  CHECK(higher >= 0.95 * total);
}

TEST_CASE("evaluation targets per mode") {
  std::mt19937_64 rng(64);
  const Frame ps = testutil::random_frame(32, 32, rng);
  const Clip clip({testutil::random_frame(32, 32, rng), testutil::random_frame(32, 32, rng)}, ps, "c");
  const BlockMatchingBackend bm(8, 4);
  const MaskGenConfig mc;

  auto orig = make_eval_targets(clip, TargetMode::OriginalPS, nullptr, nullptr, bm, mc);
  REQUIRE(orig.size() == 2);
  CHECK(orig[1] == ps);

  const DesmokeNet id(NetworkConfig::tiny(), 1);
  auto enh = make_eval_targets(clip, TargetMode::EnhancedPS, &id, nullptr, bm, mc);
  CHECK(enh[0] == ps);
  CHECK_THROWS_AS(make_eval_targets(clip, TargetMode::EnhancedPS, nullptr, nullptr, bm, mc), Error);

  const Clip gt({testutil::random_frame(32, 32, rng), testutil::random_frame(32, 32, rng)}, ps, "c");
  auto syn = make_eval_targets(clip, TargetMode::SyntheticGT, nullptr, &gt, bm, mc);
  CHECK(syn[1] == gt.frame(1));
  CHECK_THROWS_AS(make_eval_targets(clip, TargetMode::SyntheticGT, nullptr, nullptr, bm, mc), Error);

  CHECK(parse_target_mode("synthetic-gt") == TargetMode::SyntheticGT);
  CHECK(target_mode_name(TargetMode::EnhancedPS) == "enhanced-ps");
}

TEST_CASE("report aggregation averages per-clip means") {
  std::vector<FrameScore> fs{{"a", 1, 10.0, 0.5, 0.1, true},
                             {"a", 2, 20.0, 0.7, 0.3, true},
                             {"b", 1, 40.0, 0.9, 0.2, true},
                             {"b", 2, 0.0, 0.0, 0.4, false}};
  const EvalReport r = aggregate(TargetMode::OriginalPS, fs);
  REQUIRE(r.clips.size() == 2);
  CHECK(r.clips[0].psnr == doctest::Approx(15.0));
  CHECK(r.clips[1].psnr == doctest::Approx(40.0));
  CHECK(r.clips[1].undefined_frames == 1);
  CHECK(r.psnr == doctest::Approx(27.5));
  CHECK(r.ssim == doctest::Approx(0.75));

  testutil::TempDir dir;
  r.write_csv(dir.path() / "r.csv");
  std::ifstream in(dir.path() / "r.csv");
  std::string header, line, last;
  std::getline(in, header);
  CHECK(header == "clip_id,frame,psnr,ssim,density");
  while (std::getline(in, line)) last = line;
  CHECK(last.rfind("b,2,nan,nan,", 0) == 0);
  r.write_summary(dir.path() / "s.json");
  CHECK(r.summary().at("psnr").get<double>() == doctest::Approx(27.5));
}

TEST_CASE("score_clip marks frames without valid pixels") {
  std::mt19937_64 rng(65);
  struct FarFlow final : FlowBackend {
    Tensor estimate(const Tensor& s, const Tensor&) const override {
      return Tensor(Shape{1, 2, s.h(), s.w()}, 100.0);
    }
    std::string name() const override { return "far"; }
  } far;
  const Frame a = testutil::random_frame(16, 16, rng);
  const auto scores = score_clip("x", {a}, {a}, far);
  REQUIRE(scores.size() == 1);
  CHECK_FALSE(scores[0].defined);
}
