// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "desmoke/autograd.hpp"

namespace desmoke::nn {

using Rng = std::mt19937_64;

/// Ordered (name, parameter) list. Names are module paths such as
/// "encoder_smoky.blocks.0.conv1.weight".
class ParameterSet {
 public:
  void add(std::string name, Var param);
  void append(const std::string& prefix, const ParameterSet& other);

  const std::vector<std::pair<std::string, Var>>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  std::uint64_t count() const noexcept;  // scalar parameters
  void zero_grad();
  const Var* find(const std::string& name) const;

 private:
  std::vector<std::pair<std::string, Var>> items_;
};

struct Conv2d {
  Var weight;  // (out, in, k, k)
  Var bias;    // (1, out, 1, 1)
  int stride = 1;
  int pad = 0;

  Conv2d() = default;
  /// He-uniform weights scaled by `scale`, zero bias. scale 0 gives an
  /// all-zero layer.
  Conv2d(int in, int out, int kernel, int stride, int pad, Rng& rng, double scale = 1.0);

  Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }
  ParameterSet parameters() const;
};

/// x + conv(relu(conv(x))), no normalization.
struct ResidualBlock {
  Conv2d conv1;
  Conv2d conv2;

  ResidualBlock() = default;
  ResidualBlock(int channels, Rng& rng);
  Var operator()(const Var& x) const;
  ParameterSet parameters() const;
};

struct BatchNorm2d {
  Var gamma;
  Var beta;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels);
  Var operator()(const Var& x) const { return batch_norm(x, gamma, beta); }
  ParameterSet parameters() const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are keyed by parameter name so
/// they can be written to and restored from checkpoints.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const ParameterSet& params, double lr);

  std::int64_t steps() const noexcept { return t_; }
  void set_steps(std::int64_t t) noexcept { t_ = t; }
  std::map<std::string, Tensor>& first_moments() noexcept { return m_; }
  std::map<std::string, Tensor>& second_moments() noexcept { return v_; }
  const std::map<std::string, Tensor>& first_moments() const noexcept { return m_; }
  const std::map<std::string, Tensor>& second_moments() const noexcept { return v_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

}  // namespace desmoke::nn
