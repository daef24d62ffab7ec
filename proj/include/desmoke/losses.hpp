// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <cstddef>
#include <vector>

#include "desmoke/autograd.hpp"
#include "desmoke/flow.hpp"
#include "desmoke/frame.hpp"

namespace desmoke {

struct LossWeights {
  double lambda_reg = 0.05;
  double lambda_gan = 1.0;

  void validate() const;
};

/// A loss value with its gradient w.r.t. the differentiated argument.
struct LossTerm {
  double value = 0.0;
  Tensor grad;
};

/// Flow-aligned L1 for one output against the target with a frozen flow:
/// mean over valid pixels (all channels) of |V * (warp(output) - target)|,
/// V being the validity mask of `flow`. Zero when nothing is valid.
/// Inputs (1,C,H,W).
LossTerm rec_term(const Tensor& output, const Tensor& target, const Tensor& flow, double tau);

/// mean |M * F| over every feature element; gradient w.r.t. F.
LossTerm reg_term(const Tensor& mask_map, const Tensor& features);

/// 0.5 * mean((scores - 1)^2); gradient w.r.t. scores.
LossTerm gan_g_term(const Tensor& scores);

/// 0.5 * mean((real - 1)^2) + 0.5 * mean(fake^2); gradients w.r.t. both.
struct GanDTerm {
  double value = 0.0;
  Tensor grad_real;
  Tensor grad_fake;
};
GanDTerm gan_d_term(const Tensor& real_scores, const Tensor& fake_scores);

struct RecLossStats {
  std::size_t all_invalid_frames = 0;  // frames that contributed 0
};

/// Sum over outputs of the per-frame aligned L1, averaged over the batch.
/// For every item the flow target -> output is estimated on the detached
/// output, so alignment is a fixed operator within one step.
nn::Var rec_loss(const std::vector<nn::Var>& outputs, const Tensor& target,
                 const FlowBackend& flow, double tau, RecLossStats* stats = nullptr);

/// Scalar overloads on plain frames.
double rec_loss(const std::vector<Frame>& outputs, const Frame& target, const FlowBackend& flow,
                double tau, RecLossStats* stats = nullptr);

/// mean |M * F|, M expanded from per-item patch masks onto F's grid.
nn::Var reg_loss(const std::vector<PatchMask>& masks, const nn::Var& features);
double reg_loss(const PatchMask& mask, const Tensor& features);

nn::Var gan_g_loss(const nn::Var& scores);
double gan_g_loss(const Tensor& scores);

nn::Var gan_d_loss(const nn::Var& real_scores, const nn::Var& fake_scores);
double gan_d_loss(const Tensor& real_scores, const Tensor& fake_scores);

/// rec + lambda_reg * reg + lambda_gan * gan_g. Non-finite components raise
/// NumericalError.
double total_loss(double rec, double reg, double gan_g, const LossWeights& w);
nn::Var total_loss(const nn::Var& rec, const nn::Var& reg, const nn::Var& gan_g,
                   const LossWeights& w);

}  // namespace desmoke
