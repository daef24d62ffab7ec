// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/frame.hpp"

#include <algorithm>
#include <cmath>

#include "desmoke/error.hpp"

namespace desmoke {

bool Frame::valid(const Tensor& t) noexcept {
  const Shape& s = t.shape();
  if (s.n != 1 || s.c != 3) return false;
  if (s.h < kMinSide || s.w < kMinSide || s.h % 4 != 0 || s.w % 4 != 0) return false;
  return std::all_of(t.vec().begin(), t.vec().end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

Frame::Frame(Tensor data) : data_(std::move(data)) {
  const Shape& s = data_.shape();
  require(s.n == 1 && s.c == 3, ErrorCode::ShapeMismatch,
          "frame must be (1,3,H,W), got " + s.str());
  require(s.h >= kMinSide && s.w >= kMinSide && s.h % 4 == 0 && s.w % 4 == 0,
          ErrorCode::ShapeMismatch,
          "frame sides must be >= 16 and divisible by 4, got " + s.str());
  for (double v : data_.vec())
    require(v >= 0.0 && v <= 1.0, ErrorCode::InvalidInput,
            "frame intensity outside [0,1]: " + std::to_string(v));
}

Frame Frame::black(int height, int width) {
  return Frame(Tensor(Shape{1, 3, height, width}, 0.0));
}

Frame clamp_to_frame(Tensor t) {
  for (double& v : t.vec()) v = std::clamp(v, 0.0, 1.0);
  return Frame(std::move(t));
}

Clip::Clip(std::vector<Frame> frames, Frame ps_frame, std::string id)
    : frames_(std::move(frames)), ps_(std::move(ps_frame)), id_(std::move(id)) {
  require(!frames_.empty(), ErrorCode::InvalidClip, "clip needs at least one frame");
  for (const auto& f : frames_)
    require(f.height() == ps_.height() && f.width() == ps_.width(),
            ErrorCode::ShapeMismatch, "clip frames differ in size");
}

FlowField::FlowField(Tensor t, std::string src, std::string dst)
    : uv(std::move(t)), source(std::move(src)), target(std::move(dst)) {
  require(uv.n() == 1 && uv.c() == 2, ErrorCode::ShapeMismatch,
          "flow must be (1,2,H,W), got " + uv.shape().str());
  require(uv.all_finite(), ErrorCode::InvalidFlow, "flow contains non-finite values");
}

FlowField FlowField::zeros(int height, int width) {
  return FlowField(Tensor(Shape{1, 2, height, width}, 0.0));
}

ValidityMask::ValidityMask(Tensor d) : data(std::move(d)) {
  require(data.c() == 1, ErrorCode::ShapeMismatch, "validity mask must be single channel");
  for (double v : data.vec())
    require(v == 0.0 || v == 1.0, ErrorCode::InvalidInput, "validity mask must be binary");
}

std::size_t ValidityMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(data.vec().begin(), data.vec().end(), 1.0));
}

PatchMask::PatchMask(int r, int c, int p, std::uint8_t fill)
    : rows(r), cols(c), patch_size(p), data(static_cast<std::size_t>(r) * c, fill) {
  require(r > 0 && c > 0 && p > 0, ErrorCode::InvalidArgument, "empty patch mask");
  require(fill <= 1, ErrorCode::InvalidInput, "patch mask must be binary");
}

PatchMask PatchMask::for_image(int height, int width, int p, std::uint8_t fill) {
  return PatchMask((height + p - 1) / p, (width + p - 1) / p, p, fill);
}

std::size_t PatchMask::count_ones() const noexcept {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

}  // namespace desmoke
