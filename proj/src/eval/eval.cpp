// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "desmoke/autograd.hpp"
#include "desmoke/error.hpp"
#include "desmoke/masked_ref.hpp"

namespace desmoke {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

void check_pair(const Frame& a, const Frame& b) {
  require(a.tensor().shape() == b.tensor().shape(), ErrorCode::ShapeMismatch,
          "metric inputs differ: " + a.tensor().shape().str() + " vs " +
              b.tensor().shape().str());
}

// "Valid" separable filtering: output (H-K+1) x (W-K+1).
std::vector<double> filter_valid(const double* src, int H, int W, const std::vector<double>& k) {
  const int K = static_cast<int>(k.size());
  const int oh = H - K + 1, ow = W - K + 1;
  std::vector<double> rows(static_cast<std::size_t>(H) * ow, 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < K; ++i) s += k[i] * src[y * W + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < K; ++i) s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double masked_psnr(const Tensor& a, const Tensor& b, const Tensor& valid) {
  require(a.shape() == b.shape() && a.n() == 1, ErrorCode::ShapeMismatch, "psnr shape mismatch");
  require(valid.c() == 1 && valid.h() == a.h() && valid.w() == a.w(), ErrorCode::ShapeMismatch,
          "psnr validity mask shape mismatch");
  const std::size_t plane = a.shape().plane();
  double se = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < a.c(); ++c) {
    const double* pa = a.plane(0, c);
    const double* pb = b.plane(0, c);
    for (std::size_t i = 0; i < plane; ++i) {
      if (valid.data()[i] != 1.0) continue;
      const double d = pa[i] - pb[i];
      se += d * d;
      ++count;
    }
  }
  require(count > 0, ErrorCode::Undefined, "no valid pixel after alignment");
  const double mse = se / static_cast<double>(count);
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double aligned_psnr(const Frame& result, const Frame& target, const FlowBackend& flow,
                    double tau) {
  check_pair(result, target);
  const Tensor f = flow.estimate(target.tensor(), result.tensor());
  return masked_psnr(backward_warp(result.tensor(), f), target.tensor(), validity_mask(f, tau));
}

Tensor luminance(const Tensor& rgb) {
  require(rgb.c() == 3 && rgb.n() == 1, ErrorCode::ShapeMismatch, "luminance expects (1,3,H,W)");
  Tensor y(Shape{1, 1, rgb.h(), rgb.w()});
  const std::size_t plane = rgb.shape().plane();
  const double *r = rgb.plane(0, 0), *g = rgb.plane(0, 1), *b = rgb.plane(0, 2);
  for (std::size_t i = 0; i < plane; ++i)
    y.data()[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return y;
}

double masked_ssim(const Tensor& a, const Tensor& b, const Tensor& valid) {
  require(a.shape() == b.shape() && a.c() == 1 && a.n() == 1, ErrorCode::ShapeMismatch,
          "ssim expects matching (1,1,H,W) maps");
  require(valid.c() == 1 && valid.h() == a.h() && valid.w() == a.w(), ErrorCode::ShapeMismatch,
          "ssim validity mask shape mismatch");
  const int H = a.h(), W = a.w(), K = kSsimWindow;
  require(H >= K && W >= K, ErrorCode::Undefined, "image smaller than the SSIM window");
  const auto g = gaussian_kernel_1d(K, kSsimSigma);
  const std::size_t n = a.shape().plane();
  std::vector<double> aa(n), bb(n), ab(n), invalid(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a.data()[i] * a.data()[i];
    bb[i] = b.data()[i] * b.data()[i];
    ab[i] = a.data()[i] * b.data()[i];
    invalid[i] = valid.data()[i] == 1.0 ? 0.0 : 1.0;
  }
  const auto mu_a = filter_valid(a.data(), H, W, g);
  const auto mu_b = filter_valid(b.data(), H, W, g);
  const auto e_aa = filter_valid(aa.data(), H, W, g);
  const auto e_bb = filter_valid(bb.data(), H, W, g);
  const auto e_ab = filter_valid(ab.data(), H, W, g);
  const std::vector<double> box(K, 1.0);
  const auto bad = filter_valid(invalid.data(), H, W, box);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    if (bad[i] > 0.0) continue;
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2)) /
             ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
    ++count;
  }
  require(count > 0, ErrorCode::Undefined, "no fully valid SSIM window");
  return total / static_cast<double>(count);
}

double aligned_ssim(const Frame& result, const Frame& target, const FlowBackend& flow,
                    double tau) {
  check_pair(result, target);
  const Tensor f = flow.estimate(target.tensor(), result.tensor());
  return masked_ssim(luminance(backward_warp(result.tensor(), f)), luminance(target.tensor()),
                     validity_mask(f, tau));
}

double smoke_density_proxy(const Frame& frame) {
  const Tensor dc = dark_channel(frame.tensor(), 15);
  return dc.sum() / static_cast<double>(dc.size());
}

std::string_view target_mode_name(TargetMode m) noexcept {
  switch (m) {
    case TargetMode::OriginalPS: return "original-ps";
    case TargetMode::EnhancedPS: return "enhanced-ps";
    case TargetMode::SyntheticGT: return "synthetic-gt";
  }
  return "unknown";
}

TargetMode parse_target_mode(std::string_view s) {
  if (s == "original-ps") return TargetMode::OriginalPS;
  if (s == "enhanced-ps") return TargetMode::EnhancedPS;
  if (s == "synthetic-gt") return TargetMode::SyntheticGT;
  fail(ErrorCode::InvalidConfig, "unknown target mode '" + std::string(s) + "'");
}

Frame enhance_ps(const DesmokeNet& model, const Frame& ps, const FlowBackend& flow,
                 const MaskGenConfig& mask_cfg) {
  nn::NoGradGuard no_grad;
  const StepResult r = step(model, ps.tensor(), ps.tensor(), std::nullopt, flow, mask_cfg);
  return clamp_to_frame(r.output.value());
}

std::vector<Frame> make_eval_targets(const Clip& clip, TargetMode mode, const DesmokeNet* model,
                                     const Clip* ground_truth, const FlowBackend& flow,
                                     const MaskGenConfig& mask_cfg) {
  switch (mode) {
    case TargetMode::OriginalPS:
      return std::vector<Frame>(clip.size(), clip.ps_frame());
    case TargetMode::EnhancedPS:
      require(model != nullptr, ErrorCode::InvalidConfig, "enhanced-ps targets need a model");
      return std::vector<Frame>(clip.size(), enhance_ps(*model, clip.ps_frame(), flow, mask_cfg));
    case TargetMode::SyntheticGT:
      require(ground_truth != nullptr, ErrorCode::InvalidConfig,
              "synthetic-gt targets need the paired clean clip of " + clip.id());
      require(ground_truth->size() == clip.size(), ErrorCode::ShapeMismatch,
              "ground truth of " + clip.id() + " has a different frame count");
      return ground_truth->frames();
  }
  fail(ErrorCode::InvalidConfig, "unknown target mode");
}

std::vector<FrameScore> score_clip(const std::string& clip_id, const std::vector<Frame>& results,
                                   const std::vector<Frame>& targets, const FlowBackend& flow,
                                   double tau) {
  require(results.size() == targets.size(), ErrorCode::ShapeMismatch,
          "result and target counts differ for " + clip_id);
  std::vector<FrameScore> out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    FrameScore s;
    s.clip_id = clip_id;
    s.frame = static_cast<int>(i) + 1;
    s.density = smoke_density_proxy(results[i]);
    try {
      s.psnr = aligned_psnr(results[i], targets[i], flow, tau);
      s.ssim = aligned_ssim(results[i], targets[i], flow, tau);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Undefined) throw;
      s.defined = false;
      s.psnr = s.ssim = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(s));
  }
  return out;
}

EvalReport aggregate(TargetMode mode, std::vector<FrameScore> frames) {
  EvalReport r;
  r.mode = mode;
  r.frames = std::move(frames);
  for (const auto& f : r.frames) {
    auto it = std::find_if(r.clips.begin(), r.clips.end(),
                           [&](const ClipScore& c) { return c.clip_id == f.clip_id; });
    if (it == r.clips.end()) {
      r.clips.push_back(ClipScore{f.clip_id});
      it = std::prev(r.clips.end());
    }
    it->density += f.density;
    if (f.defined) {
      it->psnr += f.psnr;
      it->ssim += f.ssim;
      ++it->frames;
    } else {
      ++it->undefined_frames;
    }
  }
  std::size_t scored = 0;
  for (auto& c : r.clips) {
    const int all = c.frames + c.undefined_frames;
    c.density /= all;
    r.density += c.density;
    if (c.frames == 0) {
      c.psnr = c.ssim = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    c.psnr /= c.frames;
    c.ssim /= c.frames;
    r.psnr += c.psnr;
    r.ssim += c.ssim;
    ++scored;
  }
  if (!r.clips.empty()) r.density /= static_cast<double>(r.clips.size());
  if (scored > 0) {
    r.psnr /= static_cast<double>(scored);
    r.ssim /= static_cast<double>(scored);
  } else {
    r.psnr = r.ssim = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

nlohmann::json EvalReport::summary() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  nlohmann::json clips_j = nlohmann::json::array();
  for (const auto& c : clips)
    clips_j.push_back({{"clip_id", c.clip_id},
                       {"psnr", num(c.psnr)},
                       {"ssim", num(c.ssim)},
                       {"density", num(c.density)},
                       {"frames", c.frames},
                       {"undefined_frames", c.undefined_frames}});
  return {{"target_mode", target_mode_name(mode)},
          {"psnr", num(psnr)},
          {"ssim", num(ssim)},
          {"density", num(density)},
          {"clips", clips_j}};
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IOError, "cannot write " + path.string());
  out << "clip_id,frame,psnr,ssim,density\n";
  out.precision(10);
  for (const auto& f : frames) {
    out << f.clip_id << ',' << f.frame << ',';
    if (f.defined)
      out << f.psnr << ',' << f.ssim;
    else
      out << "nan,nan";
    out << ',' << f.density << '\n';
  }
}

void EvalReport::write_summary(const std::filesystem::path& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IOError, "cannot write " + path.string());
  out << summary().dump(2) << '\n';
}

}  // namespace desmoke
