// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "desmoke/flow.hpp"
#include "desmoke/frame.hpp"

namespace desmoke {

/// Map fed to the patch SSIM. DarkChannel compares the dark channels of
/// both images; DcpDehaze first restores both with the dark channel prior
/// and compares their luma, which ignores most of the smoke veil.
enum class MaskPreprocess { DarkChannel, DcpDehaze };
std::string_view mask_preprocess_name(MaskPreprocess p) noexcept;
MaskPreprocess parse_mask_preprocess(std::string_view s);

struct MaskGenConfig {
  MaskPreprocess preprocess = MaskPreprocess::DarkChannel;
  int patch_size = 8;
  double epsilon = 0.92;
  int dcp_window = 15;
  int blur_kernel = 21;
  double blur_sigma = 5.0;

  void validate() const;
};

// SSIM stabilizers for unit-range inputs.
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Per-pixel minimum over channels and a window x window neighbourhood,
/// replicating edges. Input (1,C,H,W), output (1,1,H,W).
Tensor dark_channel(const Tensor& image, int window);

/// Single-image dark channel prior restoration: airlight from the brightest
/// 0.1% of the dark channel, t = max(t0, 1 - omega * dark(I / A)),
/// J = (I - A) / t + A clamped to [0,1].
Tensor dcp_dehaze(const Tensor& image, int window, double omega = 0.95, double t0 = 0.1);

/// Separable normalized Gaussian with edge replication, applied per channel.
Tensor gaussian_blur(const Tensor& map, int kernel, double sigma);

/// The normalized 1-D Gaussian weights used by gaussian_blur.
std::vector<double> gaussian_kernel_1d(int kernel, double sigma);

/// SSIM of two equally sized samples using one window that spans them.
double global_ssim(std::span<const double> a, std::span<const double> b);

/// Patch stage alone: both maps are single-channel and already preprocessed.
/// Maps are edge-padded to a multiple of the patch size; a patch is kept
/// (1) only when its SSIM strictly exceeds epsilon.
PatchMask patch_ssim_mask_preprocessed(const Tensor& ref_map, const Tensor& smoky_map,
                                       int patch_size, double epsilon);

/// Preprocessing (see MaskPreprocess), blur, then per-patch SSIM thresholding.
PatchMask patch_ssim_mask(const Tensor& ref_warped, const Tensor& smoky,
                          const MaskGenConfig& cfg);

struct MaskResult {
  PatchMask mask;
  Tensor warped_ref;  // (1,3,H,W)
  Tensor flow;        // (1,2,H,W): smoky -> ref backward flow
};

/// Aligns `ref` to `smoky` with the backend, then masks patches whose
/// structure disagrees.
MaskResult generate_mask(const Tensor& ref, const Tensor& smoky, const FlowBackend& backend,
                         const MaskGenConfig& cfg);

/// Multiplies (N,C,h,w) features by the patch mask expanded with nearest
/// neighbour onto the feature grid, where one feature cell spans `stride`
/// image pixels. An 8-px patch covers 2x2 cells at stride 4.
Tensor mask_features(const Tensor& features, const PatchMask& mask, int stride = 4);

/// The same expansion materialized as a (1,1,h,w) 0/1 map.
Tensor expand_mask(const PatchMask& mask, int feat_h, int feat_w, int stride = 4);

/// Debug dump as 8-bit PNG at patch-grid resolution (0 or 255).
void write_mask_png(const std::filesystem::path& path, const PatchMask& mask);

}  // namespace desmoke
