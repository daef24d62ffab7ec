// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/layers.hpp"

#include <cmath>

#include "desmoke/error.hpp"

namespace desmoke::nn {

void ParameterSet::add(std::string name, Var param) {
  items_.emplace_back(std::move(name), std::move(param));
}

void ParameterSet::append(const std::string& prefix, const ParameterSet& other) {
  for (const auto& [name, p] : other.items_) items_.emplace_back(prefix + "." + name, p);
}

std::uint64_t ParameterSet::count() const noexcept {
  std::uint64_t total = 0;
  for (const auto& [name, p] : items_) total += p.value().size();
  return total;
}

void ParameterSet::zero_grad() {
  for (auto& [name, p] : items_) p.zero_grad();
}

const Var* ParameterSet::find(const std::string& name) const {
  for (const auto& [n, p] : items_)
    if (n == name) return &p;
  return nullptr;
}

Conv2d::Conv2d(int in, int out, int kernel, int stride_, int pad_, Rng& rng, double scale)
    : stride(stride_), pad(pad_) {
  require(in > 0 && out > 0 && kernel > 0, ErrorCode::InvalidArgument, "bad conv geometry");
  Tensor w(Shape{out, in, kernel, kernel});
  const double bound = std::sqrt(6.0 / (in * kernel * kernel));
  std::uniform_real_distribution<double> dist(-bound, bound);
  // draw even when scale is zero so later layers see the same stream
  for (double& v : w.vec()) v = dist(rng) * scale;
  weight = Var(std::move(w), true);
  bias = Var(Tensor(Shape{1, out, 1, 1}, 0.0), true);
}

ParameterSet Conv2d::parameters() const {
  ParameterSet ps;
  ps.add("weight", weight);
  ps.add("bias", bias);
  return ps;
}

ResidualBlock::ResidualBlock(int channels, Rng& rng)
    : conv1(channels, channels, 3, 1, 1, rng, 0.1), conv2(channels, channels, 3, 1, 1, rng, 0.1) {}

Var ResidualBlock::operator()(const Var& x) const { return add(x, conv2(relu(conv1(x)))); }

ParameterSet ResidualBlock::parameters() const {
  ParameterSet ps;
  ps.append("conv1", conv1.parameters());
  ps.append("conv2", conv2.parameters());
  return ps;
}

BatchNorm2d::BatchNorm2d(int channels)
    : gamma(Tensor(Shape{1, channels, 1, 1}, 1.0), true),
      beta(Tensor(Shape{1, channels, 1, 1}, 0.0), true) {}

ParameterSet BatchNorm2d::parameters() const {
  ParameterSet ps;
  ps.add("gamma", gamma);
  ps.add("beta", beta);
  return ps;
}

void Adam::step(const ParameterSet& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& [name, p] : params.items()) {
    if (!p.has_grad()) continue;
    const Tensor& g = p.node()->grad;
    auto [mit, m_new] = m_.try_emplace(name, g.shape(), 0.0);
    auto [vit, v_new] = v_.try_emplace(name, g.shape(), 0.0);
    double* m = mit->second.data();
    double* v = vit->second.data();
    double* w = p.node()->value.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g.data()[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
    }
  }
}

}  // namespace desmoke::nn
