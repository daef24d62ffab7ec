// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "desmoke/error.hpp"
#include "desmoke/smoke_sim.hpp"
#include "test_util.hpp"

using namespace desmoke;

namespace {

Clip small_scene(std::uint64_t seed, int frames = 6) {
  SceneParams sp;
  sp.height = 32;
  sp.width = 32;
  sp.frames = frames;
  sp.seed = seed;
  return synth_clean_clip(sp);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("temporal profile ramps, holds and decays") {
  SmokeParams p;
  p.profile = {2.0, 4.0, 6.0, 10.0};
  CHECK(temporal_profile(p, 1) == 0.0);
  CHECK(temporal_profile(p, 2) == 0.0);
  CHECK(temporal_profile(p, 3) == doctest::Approx(0.5));
  CHECK(temporal_profile(p, 4) == 1.0);
  CHECK(temporal_profile(p, 6) == 1.0);
  CHECK(temporal_profile(p, 8) == doctest::Approx(0.5));
  CHECK(temporal_profile(p, 10) == 0.0);
  CHECK(temporal_profile(p, 20) == 0.0);
}

TEST_CASE("transmission field bounds and special cases") {
  SmokeParams p;
  for (int k : {2, 4, 9}) {
    const Tensor t = transmission_field(p, k, 32, 48);
    REQUIRE(t.shape() == (Shape{1, 1, 32, 48}));
    double mx = 0.0, mn = 1.0;
    for (double v : t.vec()) {
      mx = std::max(mx, v);
      mn = std::min(mn, v);
    }
    CHECK(mn >= 0.0);
    // densest allowed transmission sits at 1 - L, and the field is not flat
    const double L = p.density_peak * temporal_profile(p, k);
    CHECK(mx == doctest::Approx(1.0 - L).epsilon(1e-12));
    CHECK(mn < mx);
  }
  CHECK(transmission_field(p, 1, 16, 16).vec() == Tensor(Shape{1, 1, 16, 16}, 1.0).vec());
  p.density_peak = 0.0;
  CHECK(transmission_field(p, 5, 16, 16).vec() == Tensor(Shape{1, 1, 16, 16}, 1.0).vec());
}

TEST_CASE("transmission field is deterministic and seed dependent") {
  SmokeParams p;
  CHECK(transmission_field(p, 5, 32, 32).vec() == transmission_field(p, 5, 32, 32).vec());
  SmokeParams q = p;
  q.seed = 2;
  CHECK(transmission_field(p, 5, 32, 32).vec() != transmission_field(q, 5, 32, 32).vec());
  // drift makes consecutive frames differ
  CHECK(transmission_field(p, 5, 32, 32).vec() != transmission_field(p, 6, 32, 32).vec());
}

TEST_CASE("composite follows the scattering model") {
  const Clip clean = small_scene(3);
  SmokeParams p;
  std::vector<Tensor> ts;
  const Clip smoky = synth_smoke(clean, p, &ts);
  REQUIRE(smoky.size() == clean.size() - 1);
  REQUIRE(ts.size() == smoky.size());
  CHECK(smoky.ps_frame() == clean.frame(0));
  for (std::size_t k = 0; k < smoky.size(); ++k) {
    const Tensor& I = clean.frame(k + 1).tensor();
    const Tensor& S = smoky.frame(k).tensor();
    const Tensor expect_t = transmission_field(p, static_cast<int>(k) + 2, 32, 32);
    CHECK(ts[k].vec() == expect_t.vec());
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const double t = ts[k].at(0, 0, y, x);
          REQUIRE(S.at(0, c, y, x) ==
                  doctest::Approx(I.at(0, c, y, x) * t + p.airlight[c] * (1 - t)).epsilon(1e-14));
        }
  }
}

TEST_CASE("clean frame is recoverable where transmission is positive") {
  const Clip clean = small_scene(4);
  std::vector<Tensor> ts;
  SmokeParams p;
  const Clip smoky = synth_smoke(clean, p, &ts);
  double worst = 0.0;
  for (std::size_t k = 0; k < smoky.size(); ++k)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 32 * 32; ++i) {
        const double t = ts[k].data()[i];
        if (t < 0.05) continue;
        const double rec = (smoky.frame(k).tensor().plane(0, c)[i] - p.airlight[c] * (1 - t)) / t;
        worst = std::max(worst, std::abs(rec - clean.frame(k + 1).tensor().plane(0, c)[i]));
      }
  CHECK(worst <= 1e-10);
}

TEST_CASE("closed-form composites") {
  const Frame gray(Tensor(Shape{1, 3, 16, 16}, 0.2));
  const Clip clean({gray, gray}, gray, "g");
  SmokeParams p;
  p.airlight = {1.0, 1.0, 1.0};
  p.profile = {0.0, 0.5, 10.0, 20.0};  // full level from frame 1 on
  p.density_peak = 0.5;
  p.heterogeneity = 0.0;
  const Clip s = synth_smoke(clean, p);
  for (double v : s.frame(0).tensor().vec()) CHECK(v == doctest::Approx(0.6));

  p.density_peak = 0.0;
  CHECK(synth_smoke(clean, p).frame(0) == gray);
  p.density_peak = 1.0;
  const Clip white = synth_smoke(clean, p);
  for (double v : white.frame(0).tensor().vec()) CHECK(v == 1.0);

  CHECK_THROWS_AS(synth_smoke(Clip({gray}, gray, "one"), SmokeParams{}), Error);
}

TEST_CASE("procedural scenes are deterministic and move") {
  const Clip a = small_scene(9), b = small_scene(9), c = small_scene(10);
  CHECK(a.frame(3) == b.frame(3));
  CHECK_FALSE(a.frame(3) == c.frame(3));
  CHECK_FALSE(a.frame(0) == a.frame(4));
  CHECK(a.ps_frame() == a.frame(0));
}

TEST_CASE("dataset build: split sizes, sidecars, reproducible manifest") {
  testutil::TempDir dir;
  SceneParams base;
  base.height = 32;
  base.width = 32;
  base.frames = 4;
  const auto clips = generate_clean_corpus(dir.path() / "clean", 10, base);
  REQUIRE(clips.size() == 10);

  const SmokeParamsGrid grid;
  const BuildResult r1 = build_dataset(dir.path() / "clean", dir.path() / "d1", grid, 0.8, 5);
  const BuildResult r2 = build_dataset(dir.path() / "clean", dir.path() / "d2", grid, 0.8, 5);
  int train = 0, test = 0;
  for (const auto& e : r1.entries) (e.split == Split::Train ? train : test)++;
  CHECK(train == 8);
  CHECK(test == 2);
  CHECK(slurp(r1.manifest) == slurp(r2.manifest));

  const auto& e = r1.entries.front();
  const auto smoky_dir = dir.path() / "d1" / e.path;
  const auto params = nlohmann::json::parse(slurp(smoky_dir / "params.json"));
  const SmokeParams sp = smoke_params_from_json(params);
  CHECK(sp.density_peak == 0.6);
  CHECK(std::filesystem::exists(smoky_dir / "t_0001.png"));

  const Clip smoky = load_clip(smoky_dir);
  const auto gt = load_ground_truth(smoky_dir);
  REQUIRE(gt.has_value());
  CHECK(smoky.size() == 3);
  CHECK(gt->size() == smoky.size());

  const Dataset test_set = load_dataset(r1.manifest, Split::Test);
  CHECK(test_set.clips.size() == 2);
  const BuildResult r3 = build_dataset(dir.path() / "clean", dir.path() / "d3", grid, 0.8, 6);
  CHECK(slurp(r3.manifest) != slurp(r1.manifest));
}

TEST_CASE("smoke params json round trip and validation") {
  SmokeParams p;
  p.seed = 99;
  p.drift = {0.1, 0.2};
  const SmokeParams q = smoke_params_from_json(to_json(p));
  CHECK(q.seed == 99);
  CHECK(q.drift == p.drift);
  CHECK(q.profile == p.profile);
  p.profile = {3.0, 2.0, 5.0, 6.0};
  CHECK_THROWS_AS(p.validate(), Error);
}
