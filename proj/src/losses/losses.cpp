// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/losses.hpp"

#include <cmath>

#include "desmoke/error.hpp"
#include "desmoke/masked_ref.hpp"

namespace desmoke {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Tensor stack_masks(const std::vector<PatchMask>& masks, int n, int h, int w) {
  require(masks.size() == static_cast<std::size_t>(n), ErrorCode::ShapeMismatch,
          "need one patch mask per batch item");
  Tensor out(Shape{n, 1, h, w});
  for (int i = 0; i < n; ++i) out.set_item(i, expand_mask(masks[i], h, w));
  return out;
}

}  // namespace

void LossWeights::validate() const {
  require(lambda_reg >= 0.0 && lambda_gan >= 0.0, ErrorCode::InvalidConfig,
          "loss weights must be >= 0");
}

LossTerm rec_term(const Tensor& output, const Tensor& target, const Tensor& flow, double tau) {
  require(output.shape() == target.shape() && output.n() == 1, ErrorCode::ShapeMismatch,
          "rec_term: " + output.shape().str() + " vs " + target.shape().str());
  const Tensor warped = backward_warp(output, flow);
  const Tensor valid = validity_mask(flow, tau);
  const int C = output.c();
  const std::size_t plane = output.shape().plane();
  std::size_t valid_px = 0;
  for (double v : valid.vec()) valid_px += v == 1.0;
  LossTerm t;
  Tensor g(output.shape(), 0.0);
  if (valid_px == 0) {
    t.grad = std::move(g);
    return t;
  }
  const double count = static_cast<double>(valid_px) * C;
  double total = 0.0;
  for (int c = 0; c < C; ++c) {
    const double* wv = warped.plane(0, c);
    const double* tv = target.plane(0, c);
    double* gv = g.plane(0, c);
    for (std::size_t p = 0; p < plane; ++p) {
      if (valid.data()[p] == 0.0) continue;
      const double d = wv[p] - tv[p];
      total += std::abs(d);
      gv[p] = sign(d) / count;
    }
  }
  t.value = total / count;
  t.grad = backward_warp_adjoint(g, flow);
  return t;
}

LossTerm reg_term(const Tensor& mask_map, const Tensor& features) {
  const Shape s = features.shape();
  require(mask_map.c() == 1 && mask_map.h() == s.h && mask_map.w() == s.w &&
              (mask_map.n() == s.n || mask_map.n() == 1),
          ErrorCode::ShapeMismatch,
          "reg_term: mask " + mask_map.shape().str() + " vs features " + s.str());
  require(s.numel() > 0, ErrorCode::InvalidInput, "reg_term on empty features");
  const double count = static_cast<double>(s.numel());
  const std::size_t plane = s.plane();
  LossTerm t;
  t.grad = Tensor(s, 0.0);
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const double* m = mask_map.plane(mask_map.n() == 1 ? 0 : n, 0);
    for (int c = 0; c < s.c; ++c) {
      const double* f = features.plane(n, c);
      double* g = t.grad.plane(n, c);
      for (std::size_t p = 0; p < plane; ++p) {
        total += std::abs(m[p] * f[p]);
        g[p] = m[p] * sign(m[p] * f[p]) / count;
      }
    }
  }
  t.value = total / count;
  return t;
}

LossTerm gan_g_term(const Tensor& scores) {
  require(!scores.empty(), ErrorCode::InvalidInput, "gan_g on empty scores");
  const double count = static_cast<double>(scores.size());
  LossTerm t;
  t.grad = Tensor(scores.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double d = scores.data()[i] - 1.0;
    total += d * d;
    t.grad.data()[i] = d / count;
  }
  t.value = 0.5 * total / count;
  return t;
}

GanDTerm gan_d_term(const Tensor& real, const Tensor& fake) {
  require(!real.empty() && !fake.empty(), ErrorCode::InvalidInput, "gan_d on empty scores");
  GanDTerm t;
  t.grad_real = Tensor(real.shape());
  t.grad_fake = Tensor(fake.shape());
  const double nr = static_cast<double>(real.size()), nf = static_cast<double>(fake.size());
  double sr = 0.0, sf = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    const double d = real.data()[i] - 1.0;
    sr += d * d;
    t.grad_real.data()[i] = d / nr;
  }
  for (std::size_t i = 0; i < fake.size(); ++i) {
    const double d = fake.data()[i];
    sf += d * d;
    t.grad_fake.data()[i] = d / nf;
  }
  t.value = 0.5 * sr / nr + 0.5 * sf / nf;
  return t;
}

nn::Var rec_loss(const std::vector<nn::Var>& outputs, const Tensor& target,
                 const FlowBackend& flow, double tau, RecLossStats* stats) {
  require(!outputs.empty(), ErrorCode::InvalidInput, "rec_loss needs at least one output");
  const int N = target.n();
  double value = 0.0;
  std::vector<std::pair<nn::Var, Tensor>> grads;
  for (const auto& out : outputs) {
    require(out.shape() == target.shape(), ErrorCode::ShapeMismatch,
            "rec_loss: output " + out.shape().str() + " vs target " + target.shape().str());
    Tensor g(out.shape(), 0.0);
    for (int n = 0; n < N; ++n) {
      const Tensor o = out.value().item(n);
      const Tensor t = target.item(n);
      const Tensor f = flow.estimate(t, o);
      LossTerm term = rec_term(o, t, f, tau);
      if (stats && term.value == 0.0 && validity_mask(f, tau).sum() == 0.0)
        ++stats->all_invalid_frames;
      value += term.value / N;
      for (double& v : term.grad.vec()) v /= N;
      g.set_item(n, term.grad);
    }
    grads.emplace_back(out, std::move(g));
  }
  return nn::scalar_with_grads(value, std::move(grads));
}

double rec_loss(const std::vector<Frame>& outputs, const Frame& target, const FlowBackend& flow,
                double tau, RecLossStats* stats) {
  std::vector<nn::Var> vars;
  for (const auto& f : outputs) vars.emplace_back(f.tensor());
  nn::NoGradGuard no_grad;
  return rec_loss(vars, target.tensor(), flow, tau, stats).value().data()[0];
}

nn::Var reg_loss(const std::vector<PatchMask>& masks, const nn::Var& features) {
  const Shape s = features.shape();
  LossTerm t = reg_term(stack_masks(masks, s.n, s.h, s.w), features.value());
  return nn::scalar_with_grads(t.value, {{features, std::move(t.grad)}});
}

double reg_loss(const PatchMask& mask, const Tensor& features) {
  require(features.n() == 1, ErrorCode::ShapeMismatch, "reg_loss expects one feature map");
  return reg_term(expand_mask(mask, features.h(), features.w()), features).value;
}

nn::Var gan_g_loss(const nn::Var& scores) {
  LossTerm t = gan_g_term(scores.value());
  return nn::scalar_with_grads(t.value, {{scores, std::move(t.grad)}});
}

double gan_g_loss(const Tensor& scores) { return gan_g_term(scores).value; }

nn::Var gan_d_loss(const nn::Var& real, const nn::Var& fake) {
  GanDTerm t = gan_d_term(real.value(), fake.value());
  return nn::scalar_with_grads(t.value,
                               {{real, std::move(t.grad_real)}, {fake, std::move(t.grad_fake)}});
}

double gan_d_loss(const Tensor& real, const Tensor& fake) { return gan_d_term(real, fake).value; }

double total_loss(double rec, double reg, double gan_g, const LossWeights& w) {
  w.validate();
  require(std::isfinite(rec) && std::isfinite(reg) && std::isfinite(gan_g),
          ErrorCode::NumericalError, "non-finite loss component");
  return rec + w.lambda_reg * reg + w.lambda_gan * gan_g;
}

nn::Var total_loss(const nn::Var& rec, const nn::Var& reg, const nn::Var& gan_g,
                   const LossWeights& w) {
  total_loss(rec.value().data()[0], reg.value().data()[0], gan_g.value().data()[0], w);
  const nn::Var parts[3] = {rec, reg, gan_g};
  const double weights[3] = {1.0, w.lambda_reg, w.lambda_gan};
  return nn::weighted_sum(parts, weights);
}

}  // namespace desmoke
