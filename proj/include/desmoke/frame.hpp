// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "desmoke/tensor.hpp"

namespace desmoke {

/// RGB image in [0,1], stored as a (1,3,H,W) tensor. H and W are at least 16
/// and divisible by 4 so two stride-2 reductions are exact.
class Frame {
 public:
  static constexpr int kMinSide = 16;

  Frame() = default;
  explicit Frame(Tensor data);

  /// Zero-filled frame of the given size.
  static Frame black(int height, int width);

  const Tensor& tensor() const noexcept { return data_; }
  int height() const noexcept { return data_.h(); }
  int width() const noexcept { return data_.w(); }
  double at(int c, int y, int x) const noexcept { return data_.at(0, c, y, x); }

  bool operator==(const Frame& o) const { return data_.vec() == o.data_.vec(); }

  /// True when `t` satisfies every Frame invariant.
  static bool valid(const Tensor& t) noexcept;

 private:
  Tensor data_;
};

/// Clamps into [0,1] and wraps as a Frame.
Frame clamp_to_frame(Tensor t);

class Clip {
 public:
  Clip() = default;
  Clip(std::vector<Frame> frames, Frame ps_frame, std::string id);

  const std::vector<Frame>& frames() const noexcept { return frames_; }
  const Frame& frame(std::size_t i) const { return frames_.at(i); }
  const Frame& ps_frame() const noexcept { return ps_; }
  const std::string& id() const noexcept { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }

  std::size_t size() const noexcept { return frames_.size(); }
  int height() const noexcept { return ps_.height(); }
  int width() const noexcept { return ps_.width(); }

  /// Set when load_clip had to crop to a multiple of 4.
  bool cropped_on_load() const noexcept { return cropped_; }
  void mark_cropped() noexcept { cropped_ = true; }

 private:
  std::vector<Frame> frames_;
  Frame ps_;
  std::string id_;
  bool cropped_ = false;
};

/// Per-pixel displacement (u horizontal, v vertical) stored as (1,2,H,W):
/// channel 0 = u, channel 1 = v. Backward convention: the value stored at
/// output pixel p points at the sampling location p + flow(p) in the input.
struct FlowField {
  Tensor uv;
  std::string source;
  std::string target;

  FlowField() = default;
  explicit FlowField(Tensor uv, std::string source = {}, std::string target = {});

  static FlowField zeros(int height, int width);
  int height() const noexcept { return uv.h(); }
  int width() const noexcept { return uv.w(); }
  double u(int y, int x) const noexcept { return uv.at(0, 0, y, x); }
  double v(int y, int x) const noexcept { return uv.at(0, 1, y, x); }
};

/// Binary map marking pixels whose warped content is sourced inside the
/// domain. Stored as (1,1,H,W) with values exactly 0 or 1.
struct ValidityMask {
  Tensor data;

  ValidityMask() = default;
  explicit ValidityMask(Tensor d);
  std::size_t count() const noexcept;
};

/// Binary per-patch mask over a ceil(H/P) x ceil(W/P) grid.
struct PatchMask {
  int rows = 0;
  int cols = 0;
  int patch_size = 0;
  std::vector<std::uint8_t> data;

  PatchMask() = default;
  PatchMask(int rows, int cols, int patch_size, std::uint8_t fill);
  static PatchMask for_image(int height, int width, int patch_size, std::uint8_t fill);

  std::uint8_t at(int r, int c) const noexcept { return data[r * cols + c]; }
  std::uint8_t& at(int r, int c) noexcept { return data[r * cols + c]; }
  std::size_t count_ones() const noexcept;
  bool operator==(const PatchMask&) const = default;
};

}  // namespace desmoke
