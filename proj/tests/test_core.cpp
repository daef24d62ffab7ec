// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include <doctest.h>

#include <fstream>

#include "desmoke/clip_io.hpp"
#include "desmoke/error.hpp"
#include "test_util.hpp"

using namespace desmoke;
using testutil::TempDir;

namespace {

Clip make_clip(int n, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Frame> frames;
  for (int i = 0; i < n; ++i) frames.push_back(testutil::random_frame(h, w, rng));
  return Clip(std::move(frames), testutil::random_frame(h, w, rng), "c");
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("frame invariants") {
  CHECK(Frame::valid(Tensor(Shape{1, 3, 16, 16}, 0.5)));
  CHECK_FALSE(Frame::valid(Tensor(Shape{1, 3, 12, 16}, 0.5)));  // below min side
  CHECK_FALSE(Frame::valid(Tensor(Shape{1, 3, 18, 16}, 0.5)));  // not a multiple of 4
  CHECK_FALSE(Frame::valid(Tensor(Shape{1, 1, 16, 16}, 0.5)));
  CHECK_FALSE(Frame::valid(Tensor(Shape{1, 3, 16, 16}, 1.5)));
  CHECK(code_of([] { Frame(Tensor(Shape{1, 3, 16, 16}, -0.1)); }) == ErrorCode::InvalidInput);

  const Frame f = clamp_to_frame(Tensor(Shape{1, 3, 16, 16}, 2.0));
  CHECK(f.at(2, 15, 15) == 1.0);
}

TEST_CASE("clip rejects mismatched frame sizes") {
  std::mt19937_64 rng(1);
  std::vector<Frame> frames{testutil::random_frame(16, 16, rng), testutil::random_frame(20, 16, rng)};
  CHECK(code_of([&] { Clip(frames, testutil::random_frame(16, 16, rng), "x"); }) ==
        ErrorCode::ShapeMismatch);
}

TEST_CASE("patch mask grid covers a partial last patch") {
  const PatchMask m = PatchMask::for_image(20, 33, 8, 1);
  CHECK(m.rows == 3);
  CHECK(m.cols == 5);
  CHECK(m.count_ones() == 15);
}

TEST_CASE("clip save/load round trip quantizes to 8 bits") {
  TempDir dir;
  const Clip clip = make_clip(3, 16, 24, 3);
  save_clip(clip, dir.path() / "c");
  const Clip back = load_clip(dir.path() / "c");
  REQUIRE(back.size() == 3);
  CHECK(back.height() == 16);
  CHECK(back.width() == 24);
  CHECK(max_abs_diff(back.frame(1).tensor(), clip.frame(1).tensor()) <= 0.5 / 255.0 + 1e-12);
  CHECK(max_abs_diff(back.ps_frame().tensor(), clip.ps_frame().tensor()) <= 0.5 / 255.0 + 1e-12);
  CHECK_FALSE(back.cropped_on_load());
}

TEST_CASE("load crops sides to a multiple of 4") {
  TempDir dir;
  std::mt19937_64 rng(4);
  const auto d = dir.path() / "odd";
  std::filesystem::create_directories(d);
  write_png(d / "ps.png", testutil::random_tensor(Shape{1, 3, 18, 23}, rng));
  write_png(d / frame_filename(1), testutil::random_tensor(Shape{1, 3, 18, 23}, rng));
  const Clip c = load_clip(d);
  CHECK(c.height() == 16);
  CHECK(c.width() == 20);
  CHECK(c.cropped_on_load());
}

TEST_CASE("load errors") {
  TempDir dir;
  std::mt19937_64 rng(5);
  const auto d = dir.path() / "c";
  std::filesystem::create_directories(d);
  write_png(d / frame_filename(1), testutil::random_tensor(Shape{1, 3, 16, 16}, rng));
  CHECK(code_of([&] { load_clip(d); }) == ErrorCode::MissingPSFrame);

  write_png(d / "ps.png", testutil::random_tensor(Shape{1, 3, 16, 16}, rng));
  write_png(d / frame_filename(3), testutil::random_tensor(Shape{1, 3, 16, 16}, rng));
  CHECK(code_of([&] { load_clip(d); }) == ErrorCode::CorruptClip);  // 0002 missing

  std::filesystem::remove(d / frame_filename(3));
  std::ofstream(d / frame_filename(2)) << "not a png";
  CHECK(code_of([&] { load_clip(d); }) == ErrorCode::IOError);

  std::filesystem::remove(d / frame_filename(2));
  write_png(d / frame_filename(2), testutil::random_tensor(Shape{1, 3, 20, 16}, rng));
  CHECK(code_of([&] { load_clip(d); }) == ErrorCode::ShapeMismatch);

  CHECK(code_of([&] { load_clip(dir.path() / "missing"); }) == ErrorCode::IOError);
}

TEST_CASE("manifest round trip and dataset loading") {
  TempDir dir;
  save_clip(make_clip(2, 16, 16, 6), dir.path() / "a");
  save_clip(make_clip(3, 16, 16, 7), dir.path() / "b");
  const auto mf = dir.path() / "manifest.tsv";
  write_manifest(mf, {{Split::Train, "a"}, {Split::Test, "b"}});

  const auto entries = read_manifest(mf);
  REQUIRE(entries.size() == 2);
  CHECK(entries[1].split == Split::Test);
  CHECK(entries[1].path == "b");

  const Dataset train = load_dataset(mf, Split::Train);
  REQUIRE(train.clips.size() == 1);
  CHECK(train.clips[0].id() == "a");
  CHECK(train.clips[0].size() == 2);
  CHECK(load_dataset(mf, Split::Test).clips[0].size() == 3);

  CHECK(parse_split("test") == Split::Test);
  CHECK(code_of([] { parse_split("val"); }) == ErrorCode::InvalidDataset);
}

TEST_CASE("manifest with a duplicate id is rejected") {
  TempDir dir;
  save_clip(make_clip(2, 16, 16, 8), dir.path() / "a");
  const auto mf = dir.path() / "manifest.tsv";
  write_manifest(mf, {{Split::Train, "a"}, {Split::Train, "a"}});
  CHECK(code_of([&] { load_dataset(mf, Split::Train); }) == ErrorCode::InvalidDataset);
}

TEST_CASE("ground truth is read from the sibling clean directory") {
  TempDir dir;
  save_clip(make_clip(2, 16, 16, 9), dir.path() / "x" / "smoky");
  CHECK_FALSE(load_ground_truth(dir.path() / "x" / "smoky").has_value());
  const Clip gt = make_clip(2, 16, 16, 10);
  save_clip(gt, dir.path() / "x" / "clean");
  const auto loaded = load_ground_truth(dir.path() / "x" / "smoky/");
  REQUIRE(loaded.has_value());
  CHECK(loaded->size() == 2);
}

TEST_CASE("error code names are stable") {
  CHECK(error_code_name(ErrorCode::MissingPSFrame) == "MissingPSFrame");
  CHECK(error_code_name(ErrorCode::NumericalError) == "NumericalError");
}
