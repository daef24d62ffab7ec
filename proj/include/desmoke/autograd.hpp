// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "desmoke/tensor.hpp"

// Reverse-mode differentiation over Tensor values. A Var is a handle to a
// graph node; ops record their parents and a closure that pushes the node's
// gradient into them. Graphs are rebuilt on every forward pass.

namespace desmoke::nn {

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Tensor& g);
  Tensor& grad_buffer();  // zero-initialized on first use
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  /// Gradient, or zeros of the value's shape when none was accumulated.
  Tensor grad() const;
  void zero_grad();

  /// Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  friend Var make_result(Tensor value, std::vector<Var> parents,
                         std::function<void(Node&)> backward_fn);
  std::shared_ptr<Node> node_;
};

/// Builds an op output. Parents that do not require grad are dropped; when
/// none remain (or grad mode is off) the result is a constant.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

/// Back-propagates from a single-element root with seed gradient 1.
void backward(const Var& root);

bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// --- ops -------------------------------------------------------------------

/// 2-D cross-correlation. x (N,Ci,H,W), weight (Co,Ci,k,k), bias (1,Co,1,1)
/// or undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);

Var add(const Var& a, const Var& b);
Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var clamp01(const Var& x);
Var concat_channels(std::span<const Var> parts);
Var concat_batch(std::span<const Var> parts);
Var pixel_shuffle(const Var& x, int factor);

/// Backward warp with a constant flow (no gradient w.r.t. the flow).
Var warp(const Var& x, const Tensor& flow);

/// Multiplies by a constant (N|1,1,H,W) map broadcast over channels.
Var mul_map(const Var& x, const Tensor& map);

/// Training-mode batch normalization over (N,H,W) per channel.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

/// A scalar whose gradient w.r.t. each input was computed by the caller.
Var scalar_with_grads(double value, std::vector<std::pair<Var, Tensor>> input_grads);

/// sum_i w_i * s_i over single-element Vars.
Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights);

}  // namespace desmoke::nn
