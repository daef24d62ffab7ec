// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <memory>
#include <string>

#include "desmoke/frame.hpp"

namespace desmoke {

enum class FlowBackendKind { BlockMatch, External };

struct FlowConfig {
  FlowBackendKind backend = FlowBackendKind::BlockMatch;
  int block_size = 8;
  int search_radius = 8;
  std::string plugin_path;      // shared object implementing flow_plugin.h
  std::string checkpoint_path;  // handed to the plugin on open
};

/// Optical-flow estimator. estimate(src, dst) returns the flow whose backward
/// warp of `dst` approximates `src`.
class FlowBackend {
 public:
  virtual ~FlowBackend() = default;
  virtual Tensor estimate(const Tensor& src, const Tensor& dst) const = 0;
  virtual std::string name() const = 0;
};

/// Exhaustive integer block matching on the sum of absolute differences,
/// with zero padding outside the frame. Ties go to the smallest displacement
/// magnitude, then to the first (v, u) in row-major order.
class BlockMatchingBackend final : public FlowBackend {
 public:
  BlockMatchingBackend(int block_size = 8, int search_radius = 8);
  Tensor estimate(const Tensor& src, const Tensor& dst) const override;
  std::string name() const override { return "blockmatch"; }

  int block_size() const noexcept { return block_; }
  int search_radius() const noexcept { return radius_; }

 private:
  int block_;
  int radius_;
  std::vector<std::pair<int, int>> order_;  // (u, v) in tie-break order
};

/// Adapter over a dlopen()ed plugin exposing the flow_plugin.h entry points.
class ExternalFlowBackend final : public FlowBackend {
 public:
  ExternalFlowBackend(const std::string& plugin_path, const std::string& checkpoint_path);
  ~ExternalFlowBackend() override;
  ExternalFlowBackend(const ExternalFlowBackend&) = delete;
  ExternalFlowBackend& operator=(const ExternalFlowBackend&) = delete;

  Tensor estimate(const Tensor& src, const Tensor& dst) const override;
  std::string name() const override { return "external"; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::shared_ptr<const FlowBackend> make_flow_backend(const FlowConfig& cfg);

/// Single-image estimate wrapped as a FlowField. src and dst must match.
FlowField estimate_flow(const FlowBackend& backend, const Tensor& src, const Tensor& dst);

/// Per-item estimate over (N,C,H,W) batches; returns (N,2,H,W).
Tensor estimate_flow_batch(const FlowBackend& backend, const Tensor& src, const Tensor& dst);

/// Bilinear backward warp with zero padding: out(p) = in(p + flow(p)).
/// `flow` is (N,2,H,W) or (1,2,H,W) broadcast over the batch.
Tensor backward_warp(const Tensor& image, const Tensor& flow);
Frame backward_warp(const Frame& image, const FlowField& flow);

/// Adjoint of backward_warp in the image argument: scatters `grad_out`
/// back onto the source grid with the same bilinear weights.
Tensor backward_warp_adjoint(const Tensor& grad_out, const Tensor& flow);

/// 1 where the warped all-ones image exceeds tau, else 0. Shape (N,1,H,W).
Tensor validity_mask(const Tensor& flow, double tau);
ValidityMask validity_mask(const FlowField& flow, double tau);

/// Bilinearly resamples a flow field to (height, width) (half-pixel centers)
/// and rescales the displacements by the resolution ratio.
Tensor resize_flow(const Tensor& flow, int height, int width);

}  // namespace desmoke
