// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "desmoke/desmoke_net.hpp"
#include "desmoke/flow.hpp"
#include "desmoke/frame.hpp"

namespace desmoke {

inline constexpr double kPsnrCapDb = 100.0;
inline constexpr double kDefaultTau = 0.999;

/// PSNR over pixels where `valid` (1,1,H,W) is 1, all channels pooled.
/// Zero error reports the cap. No valid pixel raises Undefined.
double masked_psnr(const Tensor& a, const Tensor& b, const Tensor& valid);

/// Warps `result` onto `target` with flow(target, result) and scores the
/// valid region.
double aligned_psnr(const Frame& result, const Frame& target, const FlowBackend& flow,
                    double tau = kDefaultTau);

/// ITU-R BT.601 luma, (1,1,H,W).
Tensor luminance(const Tensor& rgb);

/// Mean SSIM of single-channel maps over 11x11 Gaussian (sigma 1.5) windows
/// lying fully inside the image and fully inside `valid`. Undefined when no
/// window qualifies.
double masked_ssim(const Tensor& a, const Tensor& b, const Tensor& valid);

double aligned_ssim(const Frame& result, const Frame& target, const FlowBackend& flow,
                    double tau = kDefaultTau);

/// Mean dark channel with a 15-pixel window.
double smoke_density_proxy(const Frame& frame);

enum class TargetMode { OriginalPS, EnhancedPS, SyntheticGT };
std::string_view target_mode_name(TargetMode m) noexcept;
TargetMode parse_target_mode(std::string_view s);

/// Single-frame pass with the PS frame as both input and reference.
Frame enhance_ps(const DesmokeNet& model, const Frame& ps, const FlowBackend& flow,
                 const MaskGenConfig& mask_cfg);

/// Evaluation targets for every frame of `clip`. EnhancedPS needs `model`,
/// SyntheticGT needs the paired clean clip (InvalidConfig otherwise).
std::vector<Frame> make_eval_targets(const Clip& clip, TargetMode mode, const DesmokeNet* model,
                                     const Clip* ground_truth, const FlowBackend& flow,
                                     const MaskGenConfig& mask_cfg);

struct FrameScore {
  std::string clip_id;
  int frame = 0;  // 1-based
  double psnr = 0.0;
  double ssim = 0.0;
  double density = 0.0;
  bool defined = true;  // false when no pixel survived alignment
};

struct ClipScore {
  std::string clip_id;
  double psnr = 0.0;
  double ssim = 0.0;
  double density = 0.0;
  int frames = 0;
  int undefined_frames = 0;
};

struct EvalReport {
  TargetMode mode = TargetMode::OriginalPS;
  std::vector<FrameScore> frames;
  std::vector<ClipScore> clips;
  double psnr = 0.0;  // mean of per-clip means
  double ssim = 0.0;
  double density = 0.0;

  nlohmann::json summary() const;
  void write_csv(const std::filesystem::path& path) const;
  void write_summary(const std::filesystem::path& path) const;
};

std::vector<FrameScore> score_clip(const std::string& clip_id, const std::vector<Frame>& results,
                                   const std::vector<Frame>& targets, const FlowBackend& flow,
                                   double tau = kDefaultTau);

/// Groups per-frame scores by clip in first-seen order and averages.
EvalReport aggregate(TargetMode mode, std::vector<FrameScore> frames);

}  // namespace desmoke
