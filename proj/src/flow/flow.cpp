// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/flow.hpp"

#include <dlfcn.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "desmoke/error.hpp"
#include "desmoke/flow_plugin.h"

namespace desmoke {

BlockMatchingBackend::BlockMatchingBackend(int block_size, int search_radius)
    : block_(block_size), radius_(search_radius) {
  require(block_size >= 1, ErrorCode::InvalidConfig, "block_size must be >= 1");
  require(search_radius >= 0, ErrorCode::InvalidConfig, "search_radius must be >= 0");
  for (int v = -radius_; v <= radius_; ++v)
    for (int u = -radius_; u <= radius_; ++u) order_.emplace_back(u, v);
  std::stable_sort(order_.begin(), order_.end(), [](const auto& a, const auto& b) {
    const int ma = a.first * a.first + a.second * a.second;
    const int mb = b.first * b.first + b.second * b.second;
    return std::tie(ma, a.second, a.first) < std::tie(mb, b.second, b.first);
  });
}

Tensor BlockMatchingBackend::estimate(const Tensor& src, const Tensor& dst) const {
  require(src.shape() == dst.shape() && src.n() == 1, ErrorCode::ShapeMismatch,
          "block matching needs equal single-item shapes, got " + src.shape().str() + " vs " +
              dst.shape().str());
  const int C = src.c(), H = src.h(), W = src.w();

  // Pixels that a candidate would read from outside dst are left out, and
  // the SAD is divided by the number of compared pixels. For candidates
  // that stay inside this is the plain SAD ranking. Without it, border
  // blocks reject the true motion because it reads zeros.
  Tensor flow(Shape{1, 2, H, W});
  for (int by = 0; by < H; by += block_) {
    const int bh = std::min(block_, H - by);
    for (int bx = 0; bx < W; bx += block_) {
      const int bw = std::min(block_, W - bx);
      const int min_overlap = (bh * bw + 1) / 2;
      double best = std::numeric_limits<double>::infinity();
      int best_u = 0, best_v = 0;
      for (const auto& [u, v] : order_) {
        const int y0 = std::max(by, -v), y1 = std::min(by + bh, H - v);
        const int x0 = std::max(bx, -u), x1 = std::min(bx + bw, W - u);
        if (y1 <= y0 || x1 <= x0 || (y1 - y0) * (x1 - x0) < min_overlap) continue;
        const double count = static_cast<double>(C) * (y1 - y0) * (x1 - x0);
        const double budget = best * count;
        double sad = 0.0;
        for (int c = 0; c < C && sad < budget; ++c) {
          const double* s = src.plane(0, c);
          const double* d = dst.plane(0, c);
          for (int y = y0; y < y1 && sad < budget; ++y) {
            const double* srow = s + static_cast<std::size_t>(y) * W;
            const double* drow = d + static_cast<std::size_t>(y + v) * W + u;
            for (int x = x0; x < x1; ++x) sad += std::abs(srow[x] - drow[x]);
          }
        }
        if (sad < budget) {
          best = sad / count;
          best_u = u;
          best_v = v;
        }
      }
      for (int y = by; y < by + bh; ++y)
        for (int x = bx; x < bx + bw; ++x) {
          flow.at(0, 0, y, x) = best_u;
          flow.at(0, 1, y, x) = best_v;
        }
    }
  }
  return flow;
}

struct ExternalFlowBackend::Impl {
  void* lib = nullptr;
  void* state = nullptr;
  desmoke_flow_estimate_fn estimate = nullptr;
  desmoke_flow_close_fn close = nullptr;
};

ExternalFlowBackend::ExternalFlowBackend(const std::string& plugin_path,
                                         const std::string& checkpoint_path)
    : impl_(std::make_unique<Impl>()) {
  require(!plugin_path.empty(), ErrorCode::InvalidConfig,
          "flow.backend = external needs flow.plugin");
  impl_->lib = dlopen(plugin_path.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!impl_->lib) fail(ErrorCode::InvalidConfig, std::string("dlopen failed: ") + dlerror());
  auto open = reinterpret_cast<desmoke_flow_open_fn>(dlsym(impl_->lib, DESMOKE_FLOW_OPEN_SYMBOL));
  impl_->estimate =
      reinterpret_cast<desmoke_flow_estimate_fn>(dlsym(impl_->lib, DESMOKE_FLOW_ESTIMATE_SYMBOL));
  impl_->close =
      reinterpret_cast<desmoke_flow_close_fn>(dlsym(impl_->lib, DESMOKE_FLOW_CLOSE_SYMBOL));
  if (!open || !impl_->estimate || !impl_->close) {
    dlclose(impl_->lib);
    fail(ErrorCode::InvalidConfig, "flow plugin " + plugin_path + " lacks required symbols");
  }
  if (open(checkpoint_path.c_str(), &impl_->state) != 0) {
    dlclose(impl_->lib);
    fail(ErrorCode::InvalidConfig, "flow plugin failed to open checkpoint " + checkpoint_path);
  }
}

ExternalFlowBackend::~ExternalFlowBackend() {
  if (impl_ && impl_->lib) {
    impl_->close(impl_->state);
    dlclose(impl_->lib);
  }
}

Tensor ExternalFlowBackend::estimate(const Tensor& src, const Tensor& dst) const {
  require(src.shape() == dst.shape() && src.n() == 1, ErrorCode::ShapeMismatch,
          "external flow needs equal single-item shapes");
  Tensor flow(Shape{1, 2, src.h(), src.w()});
  const int rc = impl_->estimate(impl_->state, src.data(), dst.data(), src.c(), src.h(),
                                 src.w(), flow.plane(0, 0), flow.plane(0, 1));
  require(rc == 0, ErrorCode::InvalidFlow, "flow plugin returned " + std::to_string(rc));
  require(flow.all_finite(), ErrorCode::InvalidFlow, "flow plugin produced non-finite flow");
  return flow;
}

std::shared_ptr<const FlowBackend> make_flow_backend(const FlowConfig& cfg) {
  if (cfg.backend == FlowBackendKind::External)
    return std::make_shared<ExternalFlowBackend>(cfg.plugin_path, cfg.checkpoint_path);
  return std::make_shared<BlockMatchingBackend>(cfg.block_size, cfg.search_radius);
}

FlowField estimate_flow(const FlowBackend& backend, const Tensor& src, const Tensor& dst) {
  require(src.shape() == dst.shape(), ErrorCode::ShapeMismatch,
          "estimate_flow: " + src.shape().str() + " vs " + dst.shape().str());
  return FlowField(backend.estimate(src, dst));
}

Tensor estimate_flow_batch(const FlowBackend& backend, const Tensor& src, const Tensor& dst) {
  require(src.shape() == dst.shape(), ErrorCode::ShapeMismatch,
          "estimate_flow: " + src.shape().str() + " vs " + dst.shape().str());
  Tensor out(Shape{src.n(), 2, src.h(), src.w()});
  for (int i = 0; i < src.n(); ++i) out.set_item(i, backend.estimate(src.item(i), dst.item(i)));
  return out;
}

namespace {

void check_flow(const Tensor& image, const Tensor& flow) {
  require(flow.c() == 2 && flow.h() == image.h() && flow.w() == image.w() &&
              (flow.n() == image.n() || flow.n() == 1),
          ErrorCode::ShapeMismatch,
          "flow " + flow.shape().str() + " incompatible with " + image.shape().str());
  for (double v : flow.vec())
    require(!std::isnan(v), ErrorCode::InvalidFlow, "flow contains NaN");
}

// Bilinear taps for one output pixel: up to four (index, weight) pairs.
struct Taps {
  int idx[4];
  double wt[4];
  int count = 0;
};

inline Taps taps_at(double sx, double sy, int H, int W) {
  Taps t;
  const double fx0 = std::floor(sx), fy0 = std::floor(sy);
  const double ax = sx - fx0, ay = sy - fy0;
  // Far outside: nothing to sample. Guards the int conversion too.
  if (!(fx0 >= -1.0 && fx0 < W && fy0 >= -1.0 && fy0 < H)) return t;
  const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
  const double wts[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int k = 0; k < 4; ++k) {
    if (xs[k] < 0 || xs[k] >= W || ys[k] < 0 || ys[k] >= H) continue;
    t.idx[t.count] = ys[k] * W + xs[k];
    t.wt[t.count] = wts[k];
    ++t.count;
  }
  return t;
}

}  // namespace

Tensor backward_warp(const Tensor& image, const Tensor& flow) {
  check_flow(image, flow);
  const int N = image.n(), C = image.c(), H = image.h(), W = image.w();
  Tensor out(image.shape());
  for (int n = 0; n < N; ++n) {
    const int fn = flow.n() == 1 ? 0 : n;
    const double* fu = flow.plane(fn, 0);
    const double* fv = flow.plane(fn, 1);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * W + x;
        const Taps t = taps_at(x + fu[p], y + fv[p], H, W);
        for (int c = 0; c < C; ++c) {
          const double* in = image.plane(n, c);
          double acc = 0.0;
          for (int k = 0; k < t.count; ++k) acc += t.wt[k] * in[t.idx[k]];
          out.plane(n, c)[p] = acc;
        }
      }
  }
  return out;
}

Frame backward_warp(const Frame& image, const FlowField& flow) {
  return clamp_to_frame(backward_warp(image.tensor(), flow.uv));
}

Tensor backward_warp_adjoint(const Tensor& grad_out, const Tensor& flow) {
  check_flow(grad_out, flow);
  const int N = grad_out.n(), C = grad_out.c(), H = grad_out.h(), W = grad_out.w();
  Tensor grad_in(grad_out.shape(), 0.0);
  for (int n = 0; n < N; ++n) {
    const int fn = flow.n() == 1 ? 0 : n;
    const double* fu = flow.plane(fn, 0);
    const double* fv = flow.plane(fn, 1);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * W + x;
        const Taps t = taps_at(x + fu[p], y + fv[p], H, W);
        for (int c = 0; c < C; ++c) {
          const double g = grad_out.plane(n, c)[p];
          double* gi = grad_in.plane(n, c);
          for (int k = 0; k < t.count; ++k) gi[t.idx[k]] += t.wt[k] * g;
        }
      }
  }
  return grad_in;
}

Tensor validity_mask(const Tensor& flow, double tau) {
  require(tau > 0.0 && tau < 1.0, ErrorCode::InvalidArgument, "tau must be in (0,1)");
  const Tensor ones(Shape{flow.n(), 1, flow.h(), flow.w()}, 1.0);
  Tensor warped = backward_warp(ones, flow);
  for (double& v : warped.vec()) v = v - tau > 0.0 ? 1.0 : 0.0;
  return warped;
}

ValidityMask validity_mask(const FlowField& flow, double tau) {
  return ValidityMask(validity_mask(flow.uv, tau));
}

Tensor resize_flow(const Tensor& flow, int height, int width) {
  require(flow.c() == 2 && height > 0 && width > 0, ErrorCode::ShapeMismatch,
          "resize_flow expects (N,2,H,W)");
  const int H = flow.h(), W = flow.w();
  const double sy = static_cast<double>(H) / height;
  const double sx = static_cast<double>(W) / width;
  Tensor out(Shape{flow.n(), 2, height, width});
  for (int n = 0; n < flow.n(); ++n)
    for (int c = 0; c < 2; ++c) {
      const double* in = flow.plane(n, c);
      double* o = out.plane(n, c);
      const double scale = c == 0 ? 1.0 / sx : 1.0 / sy;
      for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, H - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, H - 1);
        const double ay = fy - y0;
        for (int x = 0; x < width; ++x) {
          const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, W - 1.0);
          const int x0 = static_cast<int>(fx);
          const int x1 = std::min(x0 + 1, W - 1);
          const double ax = fx - x0;
          const double v = (1 - ay) * ((1 - ax) * in[y0 * W + x0] + ax * in[y0 * W + x1]) +
                           ay * ((1 - ax) * in[y1 * W + x0] + ax * in[y1 * W + x1]);
          o[static_cast<std::size_t>(y) * width + x] = v * scale;
        }
      }
    }
  return out;
}

}  // namespace desmoke
