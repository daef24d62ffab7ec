// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/masked_ref.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "desmoke/clip_io.hpp"
#include "desmoke/error.hpp"

namespace desmoke {

void MaskGenConfig::validate() const {
  require(patch_size >= 1, ErrorCode::InvalidConfig, "mask.patch_size must be >= 1");
  require(epsilon > 0.0 && epsilon < 1.0, ErrorCode::InvalidConfig, "mask.epsilon must be in (0,1)");
  require(dcp_window >= 1 && dcp_window % 2 == 1, ErrorCode::InvalidConfig,
          "mask.dcp_window must be odd");
  require(blur_kernel >= 1 && blur_kernel % 2 == 1, ErrorCode::InvalidConfig,
          "mask.blur_kernel must be odd");
  require(blur_sigma > 0.0, ErrorCode::InvalidConfig, "mask.blur_sigma must be > 0");
}

Tensor dark_channel(const Tensor& image, int window) {
  require(window >= 1 && window % 2 == 1, ErrorCode::InvalidConfig,
          "dark channel window must be odd, got " + std::to_string(window));
  require(image.n() == 1 && image.c() >= 1, ErrorCode::ShapeMismatch,
          "dark_channel expects (1,C,H,W)");
  const int H = image.h(), W = image.w(), r = window / 2;
  std::vector<double> chmin(static_cast<std::size_t>(H) * W);
  for (std::size_t p = 0; p < chmin.size(); ++p) {
    double m = image.plane(0, 0)[p];
    for (int c = 1; c < image.c(); ++c) m = std::min(m, image.plane(0, c)[p]);
    chmin[p] = m;
  }
  // A square min filter separates into a row pass and a column pass.
  std::vector<double> rows(chmin.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double m = chmin[static_cast<std::size_t>(y) * W + x];
      for (int k = -r; k <= r; ++k)
        m = std::min(m, chmin[static_cast<std::size_t>(y) * W + std::clamp(x + k, 0, W - 1)]);
      rows[static_cast<std::size_t>(y) * W + x] = m;
    }
  Tensor out(Shape{1, 1, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double m = rows[static_cast<std::size_t>(y) * W + x];
      for (int k = -r; k <= r; ++k)
        m = std::min(m, rows[static_cast<std::size_t>(std::clamp(y + k, 0, H - 1)) * W + x]);
      out.at(0, 0, y, x) = m;
    }
  return out;
}

std::string_view mask_preprocess_name(MaskPreprocess p) noexcept {
  return p == MaskPreprocess::DarkChannel ? "dark_channel" : "dcp_dehaze";
}

MaskPreprocess parse_mask_preprocess(std::string_view s) {
  if (s == "dark_channel") return MaskPreprocess::DarkChannel;
  if (s == "dcp_dehaze") return MaskPreprocess::DcpDehaze;
  fail(ErrorCode::InvalidConfig, "unknown mask preprocessing '" + std::string(s) + "'");
}

Tensor dcp_dehaze(const Tensor& image, int window, double omega, double t0) {
  require(image.n() == 1 && image.c() == 3, ErrorCode::ShapeMismatch,
          "dcp_dehaze expects (1,3,H,W)");
  require(omega > 0.0 && omega <= 1.0 && t0 > 0.0 && t0 <= 1.0, ErrorCode::InvalidConfig,
          "dcp_dehaze needs omega in (0,1] and t0 in (0,1]");
  const Tensor dark = dark_channel(image, window);
  const std::size_t plane = image.shape().plane();
  std::vector<std::size_t> order(plane);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t top = std::max<std::size_t>(1, plane / 1000);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double da = dark.data()[a], db = dark.data()[b];
                      return da > db || (da == db && a < b);
                    });
  double A[3] = {0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < top; ++i)
    for (int c = 0; c < 3; ++c) A[c] = std::max(A[c], image.plane(0, c)[order[i]]);
  for (double& a : A) a = std::max(a, 1e-6);

  Tensor normalized = image;
  for (int c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < plane; ++p) normalized.plane(0, c)[p] /= A[c];
  const Tensor dn = dark_channel(normalized, window);
  Tensor out(image.shape());
  for (std::size_t p = 0; p < plane; ++p) {
    const double t = std::max(t0, 1.0 - omega * dn.data()[p]);
    for (int c = 0; c < 3; ++c)
      out.plane(0, c)[p] = std::clamp((image.plane(0, c)[p] - A[c]) / t + A[c], 0.0, 1.0);
  }
  return out;
}

std::vector<double> gaussian_kernel_1d(int kernel, double sigma) {
  require(kernel >= 1 && kernel % 2 == 1, ErrorCode::InvalidConfig,
          "blur kernel must be odd, got " + std::to_string(kernel));
  require(sigma > 0.0, ErrorCode::InvalidConfig, "blur sigma must be > 0");
  const int r = kernel / 2;
  std::vector<double> w(kernel);
  double total = 0.0;
  for (int i = 0; i < kernel; ++i) {
    const double d = i - r;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

Tensor gaussian_blur(const Tensor& map, int kernel, double sigma) {
  const std::vector<double> k = gaussian_kernel_1d(kernel, sigma);
  const int r = kernel / 2, H = map.h(), W = map.w();
  Tensor tmp(map.shape());
  Tensor out(map.shape());
  for (int n = 0; n < map.n(); ++n)
    for (int c = 0; c < map.c(); ++c) {
      const double* in = map.plane(n, c);
      double* t = tmp.plane(n, c);
      double* o = out.plane(n, c);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double acc = 0.0;
          for (int i = -r; i <= r; ++i)
            acc += k[i + r] * in[static_cast<std::size_t>(y) * W + std::clamp(x + i, 0, W - 1)];
          t[static_cast<std::size_t>(y) * W + x] = acc;
        }
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double acc = 0.0;
          for (int i = -r; i <= r; ++i)
            acc += k[i + r] * t[static_cast<std::size_t>(std::clamp(y + i, 0, H - 1)) * W + x];
          o[static_cast<std::size_t>(y) * W + x] = acc;
        }
    }
  return out;
}

double global_ssim(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && !a.empty(), ErrorCode::ShapeMismatch,
          "global_ssim needs equal non-empty samples");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  va /= n;
  vb /= n;
  cov /= n;
  return ((2 * ma * mb + kSsimC1) * (2 * cov + kSsimC2)) /
         ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
}

PatchMask patch_ssim_mask_preprocessed(const Tensor& ref_map, const Tensor& smoky_map,
                                       int patch_size, double epsilon) {
  require(ref_map.shape() == smoky_map.shape(), ErrorCode::ShapeMismatch,
          "patch mask inputs differ: " + ref_map.shape().str() + " vs " +
              smoky_map.shape().str());
  require(ref_map.n() == 1 && ref_map.c() == 1, ErrorCode::ShapeMismatch,
          "patch mask expects single-channel maps");
  require(patch_size >= 1, ErrorCode::InvalidConfig, "patch_size must be >= 1");
  const int H = ref_map.h(), W = ref_map.w(), P = patch_size;
  PatchMask mask = PatchMask::for_image(H, W, P, 0);
  std::vector<double> pa(static_cast<std::size_t>(P) * P), pb(pa.size());
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c) {
      std::size_t k = 0;
      for (int dy = 0; dy < P; ++dy)
        for (int dx = 0; dx < P; ++dx, ++k) {
          // edge replication past the bottom/right border
          const int y = std::min(r * P + dy, H - 1);
          const int x = std::min(c * P + dx, W - 1);
          pa[k] = ref_map.at(0, 0, y, x);
          pb[k] = smoky_map.at(0, 0, y, x);
        }
      mask.at(r, c) = global_ssim(pa, pb) - epsilon > 0.0 ? 1 : 0;
    }
  return mask;
}

PatchMask patch_ssim_mask(const Tensor& ref_warped, const Tensor& smoky,
                          const MaskGenConfig& cfg) {
  cfg.validate();
  require(ref_warped.shape() == smoky.shape(), ErrorCode::ShapeMismatch,
          "patch_ssim_mask: " + ref_warped.shape().str() + " vs " + smoky.shape().str());
  auto prep = [&cfg](const Tensor& img) {
    if (cfg.preprocess == MaskPreprocess::DarkChannel) return dark_channel(img, cfg.dcp_window);
    const Tensor j = dcp_dehaze(img, cfg.dcp_window);
    Tensor luma(Shape{1, 1, j.h(), j.w()});
    for (std::size_t p = 0; p < luma.size(); ++p)
      luma.data()[p] = 0.299 * j.plane(0, 0)[p] + 0.587 * j.plane(0, 1)[p] + 0.114 * j.plane(0, 2)[p];
    return luma;
  };
  const Tensor a = gaussian_blur(prep(ref_warped), cfg.blur_kernel, cfg.blur_sigma);
  const Tensor b = gaussian_blur(prep(smoky), cfg.blur_kernel, cfg.blur_sigma);
  return patch_ssim_mask_preprocessed(a, b, cfg.patch_size, cfg.epsilon);
}

MaskResult generate_mask(const Tensor& ref, const Tensor& smoky, const FlowBackend& backend,
                         const MaskGenConfig& cfg) {
  require(ref.shape() == smoky.shape(), ErrorCode::ShapeMismatch,
          "generate_mask: " + ref.shape().str() + " vs " + smoky.shape().str());
  MaskResult out;
  out.flow = estimate_flow(backend, smoky, ref).uv;
  out.warped_ref = backward_warp(ref, out.flow);
  out.mask = patch_ssim_mask(out.warped_ref, smoky, cfg);
  return out;
}

Tensor expand_mask(const PatchMask& mask, int feat_h, int feat_w, int stride) {
  require(stride >= 1 && mask.patch_size >= 1, ErrorCode::InvalidArgument, "bad mask stride");
  const int P = mask.patch_size;
  require((feat_h * stride + P - 1) / P == mask.rows && (feat_w * stride + P - 1) / P == mask.cols,
          ErrorCode::ShapeMismatch,
          "patch grid " + std::to_string(mask.rows) + "x" + std::to_string(mask.cols) +
              " does not cover feature grid " + std::to_string(feat_h) + "x" +
              std::to_string(feat_w));
  Tensor m(Shape{1, 1, feat_h, feat_w});
  for (int y = 0; y < feat_h; ++y)
    for (int x = 0; x < feat_w; ++x) m.at(0, 0, y, x) = mask.at(y * stride / P, x * stride / P);
  return m;
}

Tensor mask_features(const Tensor& features, const PatchMask& mask, int stride) {
  const Tensor m = expand_mask(mask, features.h(), features.w(), stride);
  Tensor out = features;
  const std::size_t plane = features.shape().plane();
  for (int n = 0; n < features.n(); ++n)
    for (int c = 0; c < features.c(); ++c) {
      double* o = out.plane(n, c);
      for (std::size_t p = 0; p < plane; ++p) o[p] *= m.data()[p];
    }
  return out;
}

void write_mask_png(const std::filesystem::path& path, const PatchMask& mask) {
  Tensor img(Shape{1, 1, mask.rows, mask.cols});
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c) img.at(0, 0, r, c) = mask.at(r, c);
  write_png(path, img);
}

}  // namespace desmoke
