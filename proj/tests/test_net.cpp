// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include <doctest.h>

#include <fstream>

#include "desmoke/checkpoint.hpp"
#include "desmoke/desmoke_net.hpp"
#include "desmoke/error.hpp"
#include "desmoke/eval.hpp"
#include "test_util.hpp"

using namespace desmoke;

namespace {

std::uint64_t conv_params(std::uint64_t in, std::uint64_t out, std::uint64_t k) {
  return out * in * k * k + out;
}

// Counted from the layer list, independent of the parameter registry.
std::uint64_t expected_generator_params(const NetworkConfig& c) {
  const std::uint64_t C = c.channels;
  const auto encoder = [&](int blocks) {
    return conv_params(3, C, 3) + conv_params(C, C, 3) + blocks * 2 * conv_params(C, C, 3);
  };
  std::uint64_t n = encoder(c.enc_blocks);
  if (c.use_ref) n += encoder(c.maskref_blocks);
  n += conv_params((c.use_ref ? 3 : 2) * C, C, 3);
  n += (c.fusion_blocks + c.recon_blocks) * 2 * conv_params(C, C, 3);
  n += 2 * conv_params(C, 4 * C, 3) + conv_params(C, 3, 3);
  return n;
}

std::vector<Tensor> clip_tensors(int n, int h, int w, std::mt19937_64& rng) {
  std::vector<Tensor> v;
  for (int i = 0; i < n; ++i) v.push_back(testutil::smooth_image(h, w, rng));
  return v;
}

}  // namespace

TEST_CASE("presets order by size and match the layer arithmetic") {
  const auto full = NetworkConfig::full(), small = NetworkConfig::small(), tiny = NetworkConfig::tiny();
  const std::uint64_t nf = DesmokeNet(full, 1).parameters().count();
  const std::uint64_t ns = DesmokeNet(small, 1).parameters().count();
  const std::uint64_t nt = DesmokeNet(tiny, 1).parameters().count();
  CHECK(nf == expected_generator_params(full));
  CHECK(ns == expected_generator_params(small));
  CHECK(nt == expected_generator_params(tiny));
  CHECK(nt < ns);
  CHECK(ns < nf);

  NetworkConfig noref = tiny;
  noref.use_ref = false;
  const DesmokeNet m(noref, 1);
  CHECK(m.parameters().count() == expected_generator_params(noref));
  CHECK(m.parameter_groups().count("encoder_ref") == 0);
}

TEST_CASE("parameter groups partition the generator") {
  const DesmokeNet m(NetworkConfig::tiny(), 2);
  std::uint64_t sum = 0;
  for (const auto& [name, n] : m.parameter_groups()) sum += n;
  CHECK(sum == m.parameters().count());
  CHECK(m.parameter_groups().size() == 4);
}

TEST_CASE("discriminator layer sizes on a 256 input") {
  const Discriminator d(DiscriminatorConfig{}, 3);
  std::vector<Shape> trace;
  nn::NoGradGuard ng;
  const nn::Var out = d(nn::Var(Tensor(Shape{1, 3, 256, 256}, 0.5)), &trace);
  REQUIRE(trace.size() == 5);
  const int sizes[5] = {128, 64, 32, 31, 30};
  const int widths[5] = {64, 128, 256, 512, 1};
  for (int i = 0; i < 5; ++i) {
    CHECK(trace[i].h == sizes[i]);
    CHECK(trace[i].w == sizes[i]);
    CHECK(trace[i].c == widths[i]);
  }
  CHECK(out.shape() == (Shape{1, 1, 30, 30}));
  CHECK_THROWS_AS(d(nn::Var(Tensor(Shape{1, 3, 64, 64}, 0.5))), Error);
}

TEST_CASE("identity at init: output equals input bit for bit") {
  std::mt19937_64 rng(41);
  const DesmokeNet m(NetworkConfig::tiny(), 5);
  const auto frames = clip_tensors(4, 32, 32, rng);
  const Tensor ref = testutil::smooth_image(32, 32, rng);
  const BlockMatchingBackend bm(8, 4);
  nn::NoGradGuard ng;
  const auto res = run_clip(m, frames, ref, bm, MaskGenConfig{});
  REQUIRE(res.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(res[i].output.value().vec() == frames[i].vec());
  CHECK(res[3].state.frame_index == 4);
}

TEST_CASE("zero mask gates the reference path completely") {
  std::mt19937_64 rng(42);
  NetworkConfig cfg = NetworkConfig::tiny();
  cfg.zero_init_final = false;
  const DesmokeNet m(cfg, 6);
  const BlockMatchingBackend bm(8, 4);
  const auto frames = clip_tensors(3, 32, 32, rng);
  const Tensor ref = testutil::smooth_image(32, 32, rng);
  Tensor noisy = ref;
  std::normal_distribution<double> nd(0.0, 0.2);
  for (double& v : noisy.vec()) v = std::clamp(v + nd(rng), 0.0, 1.0);

  nn::NoGradGuard ng;
  auto run = [&](const Tensor& r, std::uint8_t fill) {
    StepOptions opts;
    opts.forced_masks = std::vector<PatchMask>{PatchMask::for_image(32, 32, 8, fill)};
    return run_clip(m, frames, r, bm, MaskGenConfig{}, opts);
  };
  const auto a = run(ref, 0), b = run(noisy, 0);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, max_abs_diff(a[i].output.value(), b[i].output.value()));
  CHECK(worst <= 1e-6);

  // control: with the gate open the perturbation does reach the output
  const auto c = run(ref, 1), d = run(noisy, 1);
  CHECK(max_abs_diff(c[0].output.value(), d[0].output.value()) > 1e-4);
}

TEST_CASE("use_mask=false keeps every reference patch") {
  std::mt19937_64 rng(43);
  NetworkConfig cfg = NetworkConfig::tiny();
  cfg.use_mask = false;
  const DesmokeNet m(cfg, 7);
  nn::NoGradGuard ng;
  const auto r = step(m, testutil::smooth_image(32, 32, rng), testutil::random_tensor(Shape{1, 3, 32, 32}, rng),
                      std::nullopt, BlockMatchingBackend(8, 4), MaskGenConfig{});
  REQUIRE(r.masks.size() == 1);
  CHECK(r.masks[0].count_ones() == 16);
}

TEST_CASE("recurrent state from another resolution is rejected") {
  std::mt19937_64 rng(44);
  const DesmokeNet m(NetworkConfig::tiny(), 8);
  const BlockMatchingBackend bm(8, 4);
  nn::NoGradGuard ng;
  const auto first = step(m, testutil::smooth_image(32, 32, rng), testutil::smooth_image(32, 32, rng),
                          std::nullopt, bm, MaskGenConfig{});
  try {
    step(m, testutil::smooth_image(48, 48, rng), testutil::smooth_image(48, 48, rng), first.state, bm,
         MaskGenConfig{});
    FAIL("expected StateMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StateMismatch);
  }
}

TEST_CASE("batched step matches per-item steps") {
  std::mt19937_64 rng(45);
  NetworkConfig cfg = NetworkConfig::tiny();
  cfg.zero_init_final = false;
  const DesmokeNet m(cfg, 9);
  const BlockMatchingBackend bm(8, 4);
  const Tensor a = testutil::smooth_image(32, 32, rng), b = testutil::smooth_image(32, 32, rng);
  const Tensor ra = testutil::smooth_image(32, 32, rng), rb = testutil::smooth_image(32, 32, rng);
  nn::NoGradGuard ng;
  const std::vector<Tensor> xs{a, b}, rs{ra, rb};
  const auto batched = step(m, stack(xs), stack(rs), std::nullopt, bm, MaskGenConfig{});
  const auto one = step(m, b, rb, std::nullopt, bm, MaskGenConfig{});
  CHECK(max_abs_diff(batched.output.value().item(1), one.output.value()) <= 1e-12);
}

TEST_CASE("checkpoint round trip restores float32 weights") {
  testutil::TempDir dir;
  NetworkConfig cfg = NetworkConfig::tiny();
  cfg.zero_init_final = false;
  const DesmokeNet m(cfg, 10);
  Checkpoint ck;
  ck.config = nlohmann::json{{"network", to_json(cfg)}};
  ck.iteration = 17;
  ck.optimizer_steps["g"] = 17;
  store_parameters(ck, "generator", m.parameters());
  save_checkpoint(dir.path() / "a.dsmk", ck);

  const Checkpoint back = load_checkpoint(dir.path() / "a.dsmk");
  CHECK(back.iteration == 17);
  CHECK(back.optimizer_steps.at("g") == 17);
  const DesmokeNet r = load_generator(back);
  CHECK(r.config().channels == cfg.channels);
  const nn::ParameterSet src_set = m.parameters(), dst_set = r.parameters();
  const auto& src = src_set.items();
  const auto& dst = dst_set.items();
  REQUIRE(src.size() == dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    CHECK(src[i].first == dst[i].first);
    const auto& a = src[i].second.value().vec();
    const auto& b = dst[i].second.value().vec();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k)
      REQUIRE(b[k] == static_cast<double>(static_cast<float>(a[k])));
  }
  // re-saving a float32 model is lossless
  Checkpoint again;
  again.config = back.config;
  store_parameters(again, "generator", r.parameters());
  save_checkpoint(dir.path() / "b.dsmk", again);
  CHECK(parameter_hash(load_generator(load_checkpoint(dir.path() / "b.dsmk")).parameters()) ==
        parameter_hash(r.parameters()));
}

TEST_CASE("restoring into a different architecture fails") {
  NetworkConfig small = NetworkConfig::tiny();
  Checkpoint ck;
  store_parameters(ck, "generator", DesmokeNet(small, 1).parameters());
  NetworkConfig wider = small;
  wider.channels = 24;
  CHECK_THROWS_AS(restore_parameters(ck, "generator", DesmokeNet(wider, 1).parameters()), Error);
}

TEST_CASE("corrupt checkpoint files are rejected") {
  testutil::TempDir dir;
  std::ofstream(dir.path() / "bad.dsmk") << "DSMKCKPTgarbage";
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad.dsmk"), Error);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing.dsmk"), Error);
}
