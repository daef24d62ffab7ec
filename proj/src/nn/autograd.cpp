// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "desmoke/error.hpp"
#include "desmoke/flow.hpp"

namespace desmoke::nn {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using CMapRow = Eigen::Map<const RowMat>;

void add_into(Tensor& dst, const Tensor& src) {
  require(dst.shape() == src.shape(), ErrorCode::ShapeMismatch,
          "gradient shape " + src.shape().str() + " vs " + dst.shape().str());
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

void Node::accumulate(const Tensor& g) {
  if (grad.empty())
    grad = g;
  else
    add_into(grad, g);
}

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
  if (!node_->grad.empty()) return node_->grad;
  return Tensor(node_->value.shape(), 0.0);
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const Var& p) { return p.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      for (auto& p : parents) node->parents.push_back(p.node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Var(std::move(node));
}

void backward(const Var& root) {
  require(root.defined() && root.value().size() == 1, ErrorCode::InvalidArgument,
          "backward() needs a single-element root");
  if (!root.requires_grad()) return;
  // iterative post-order DFS; deep recurrent graphs overflow a recursive walk
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p && p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->accumulate(Tensor(root.value().shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// Parent i of a result node, or null when it does not take gradients.
static Node* parent_if_grad(Node& self, std::size_t i) {
  if (i >= self.parents.size()) return nullptr;
  Node* p = self.parents[i].get();
  return p && p->requires_grad ? p : nullptr;
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  require(ws.c == xs.c && ws.h == ws.w, ErrorCode::ShapeMismatch,
          "conv2d weight " + ws.str() + " vs input " + xs.str());
  require(stride >= 1 && pad >= 0, ErrorCode::InvalidArgument, "bad conv stride/pad");
  const int k = ws.h, Co = ws.n, Ci = xs.c;
  const int Ho = (xs.h + 2 * pad - k) / stride + 1;
  const int Wo = (xs.w + 2 * pad - k) / stride + 1;
  require(Ho > 0 && Wo > 0, ErrorCode::ShapeMismatch, "conv2d output would be empty");
  const int K = Ci * k * k;
  const int P = Ho * Wo;
  const bool has_bias = bias.defined();
  if (has_bias)
    require(bias.value().size() == static_cast<std::size_t>(Co), ErrorCode::ShapeMismatch,
            "conv2d bias size");

  auto cols = std::make_shared<DoubleBuffer>(static_cast<std::size_t>(xs.n) * K * P);
  Tensor out(Shape{xs.n, Co, Ho, Wo});
  CMapRow Wm(weight.value().data(), Co, K);
  for (int n = 0; n < xs.n; ++n) {
    double* col = cols->data() + static_cast<std::size_t>(n) * K * P;
    for (int c = 0; c < Ci; ++c) {
      const double* in = x.value().plane(n, c);
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          double* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * P;
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * stride - pad + ky;
            double* dst = row + oy * Wo;
            if (iy < 0 || iy >= xs.h) {
              std::fill_n(dst, Wo, 0.0);
              continue;
            }
            const double* src = in + static_cast<std::size_t>(iy) * xs.w;
            for (int ox = 0; ox < Wo; ++ox) {
              const int ix = ox * stride - pad + kx;
              dst[ox] = (ix >= 0 && ix < xs.w) ? src[ix] : 0.0;
            }
          }
        }
    }
    MapRow Y(out.plane(n, 0), Co, P);
    Y.noalias() = Wm * CMapRow(col, K, P);
    if (has_bias)
      for (int o = 0; o < Co; ++o) Y.row(o).array() += bias.value().data()[o];
  }

  std::vector<Var> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  const bool keep_cols = weight.requires_grad();
  auto fn = [=, cols = keep_cols ? cols : nullptr](Node& self) {
    const Tensor& g = self.grad;
    Node* px = parent_if_grad(self, 0);
    Node* pw = parent_if_grad(self, 1);
    Node* pb = has_bias ? parent_if_grad(self, 2) : nullptr;
    const Tensor& wv = self.parents[1]->value;
    CMapRow Wt(wv.data(), Co, K);
    DoubleBuffer dcol(px ? static_cast<std::size_t>(K) * P : 0);
    for (int n = 0; n < xs.n; ++n) {
      CMapRow dY(g.plane(n, 0), Co, P);
      if (pw) {
        MapRow dW(pw->grad_buffer().data(), Co, K);
        dW.noalias() += dY * CMapRow(cols->data() + static_cast<std::size_t>(n) * K * P, K, P).transpose();
      }
      if (pb) {
        double* db = pb->grad_buffer().data();
        for (int o = 0; o < Co; ++o) db[o] += dY.row(o).sum();
      }
      if (px) {
        MapRow dC(dcol.data(), K, P);
        dC.noalias() = Wt.transpose() * dY;
        Tensor& gx = px->grad_buffer();
        for (int c = 0; c < Ci; ++c) {
          double* gin = gx.plane(n, c);
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const double* row = dcol.data() + static_cast<std::size_t>((c * k + ky) * k + kx) * P;
              for (int oy = 0; oy < Ho; ++oy) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= xs.h) continue;
                double* dst = gin + static_cast<std::size_t>(iy) * xs.w;
                for (int ox = 0; ox < Wo; ++ox) {
                  const int ix = ox * stride - pad + kx;
                  if (ix >= 0 && ix < xs.w) dst[ix] += row[oy * Wo + ox];
                }
              }
            }
        }
      }
    }
  };
  return make_result(std::move(out), std::move(parents), std::move(fn));
}

Var add(const Var& a, const Var& b) {
  require(a.shape() == b.shape(), ErrorCode::ShapeMismatch,
          "add: " + a.shape().str() + " vs " + b.shape().str());
  Tensor out = a.value();
  add_into(out, b.value());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i)
      if (Node* p = parent_if_grad(self, i)) p->accumulate(self.grad);
  });
}

Var leaky_relu(const Var& x, double slope) {
  Tensor out = x.value();
  for (double& v : out.vec())
    if (v < 0.0) v *= slope;
  return make_result(std::move(out), {x}, [slope](Node& self) {
    Node* p = parent_if_grad(self, 0);
    Tensor g = self.grad;
    const double* in = p->value.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in[i] < 0.0) g.data()[i] *= slope;
    p->accumulate(g);
  });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0); }

Var clamp01(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.vec()) v = std::clamp(v, 0.0, 1.0);
  return make_result(std::move(out), {x}, [](Node& self) {
    Node* p = parent_if_grad(self, 0);
    Tensor g = self.grad;
    const double* in = p->value.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in[i] < 0.0 || in[i] > 1.0) g.data()[i] = 0.0;
    p->accumulate(g);
  });
}

Var concat_channels(std::span<const Var> parts) {
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (const auto& p : parts) values.push_back(p.value());
  Tensor out = desmoke::concat_channels(values);
  std::vector<int> channels;
  for (const auto& p : parts) channels.push_back(p.shape().c);
  return make_result(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                     [channels](Node& self) {
                       const Tensor& g = self.grad;
                       const std::size_t plane = g.shape().plane();
                       int offset = 0;
                       for (std::size_t i = 0; i < channels.size(); ++i) {
                         if (Node* p = parent_if_grad(self, i)) {
                           Tensor& gp = p->grad_buffer();
                           for (int n = 0; n < g.n(); ++n) {
                             const double* src = g.plane(n, offset);
                             double* dst = gp.plane(n, 0);
                             for (std::size_t j = 0; j < channels[i] * plane; ++j) dst[j] += src[j];
                           }
                         }
                         offset += channels[i];
                       }
                     });
}

Var concat_batch(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::InvalidArgument, "concat_batch of nothing");
  const Shape s0 = parts.front().shape();
  int total = 0;
  for (const auto& p : parts) {
    require(p.shape().c == s0.c && p.shape().h == s0.h && p.shape().w == s0.w,
            ErrorCode::ShapeMismatch, "concat_batch shape mismatch");
    total += p.shape().n;
  }
  Tensor out(Shape{total, s0.c, s0.h, s0.w});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().vec().begin(), p.value().vec().end(), out.vec().begin() + offset);
    offset += p.value().size();
  }
  return make_result(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                     [](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t i = 0; i < self.parents.size(); ++i) {
                         const std::size_t count = self.parents[i]->value.size();
                         if (Node* p = parent_if_grad(self, i)) {
                           Tensor& gp = p->grad_buffer();
                           for (std::size_t j = 0; j < count; ++j)
                             gp.data()[j] += self.grad.data()[off + j];
                         }
                         off += count;
                       }
                     });
}

Var pixel_shuffle(const Var& x, int r) {
  const Shape s = x.shape();
  require(r >= 1 && s.c % (r * r) == 0, ErrorCode::ShapeMismatch,
          "pixel_shuffle: channels " + std::to_string(s.c) + " not divisible by r^2");
  const int C = s.c / (r * r);
  Tensor out(Shape{s.n, C, s.h * r, s.w * r});
  auto src_index = [=](int n, int c, int y, int xx) {
    const int i = y % r, j = xx % r;
    return ((static_cast<std::size_t>(n) * s.c + c * r * r + i * r + j) * s.h + y / r) * s.w + xx / r;
  };
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < s.h * r; ++y)
        for (int xx = 0; xx < s.w * r; ++xx)
          out.at(n, c, y, xx) = x.value().data()[src_index(n, c, y, xx)];
  return make_result(std::move(out), {x}, [=](Node& self) {
    Node* p = parent_if_grad(self, 0);
    Tensor& gp = p->grad_buffer();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < s.h * r; ++y)
          for (int xx = 0; xx < s.w * r; ++xx)
            gp.data()[src_index(n, c, y, xx)] += self.grad.at(n, c, y, xx);
  });
}

Var warp(const Var& x, const Tensor& flow) {
  Tensor out = backward_warp(x.value(), flow);
  return make_result(std::move(out), {x}, [flow](Node& self) {
    parent_if_grad(self, 0)->accumulate(backward_warp_adjoint(self.grad, flow));
  });
}

Var mul_map(const Var& x, const Tensor& map) {
  const Shape s = x.shape();
  require(map.c() == 1 && map.h() == s.h && map.w() == s.w && (map.n() == s.n || map.n() == 1),
          ErrorCode::ShapeMismatch, "mul_map: map " + map.shape().str() + " vs " + s.str());
  auto apply = [s, map](Tensor& t) {
    const std::size_t plane = s.plane();
    for (int n = 0; n < s.n; ++n) {
      const double* m = map.plane(map.n() == 1 ? 0 : n, 0);
      for (int c = 0; c < s.c; ++c) {
        double* d = t.plane(n, c);
        for (std::size_t p = 0; p < plane; ++p) d[p] *= m[p];
      }
    }
  };
  Tensor out = x.value();
  apply(out);
  return make_result(std::move(out), {x}, [apply](Node& self) {
    Tensor g = self.grad;
    apply(g);
    parent_if_grad(self, 0)->accumulate(g);
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Shape s = x.shape();
  require(gamma.value().size() == static_cast<std::size_t>(s.c) &&
              beta.value().size() == static_cast<std::size_t>(s.c),
          ErrorCode::ShapeMismatch, "batch_norm affine size");
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n) * plane;
  Tensor xhat(s);
  std::vector<double> inv_std(s.c);
  Tensor out(s);
  for (int c = 0; c < s.c; ++c) {
    double mean = 0.0;
    for (int n = 0; n < s.n; ++n)
      for (std::size_t p = 0; p < plane; ++p) mean += x.value().plane(n, c)[p];
    mean /= count;
    double var = 0.0;
    for (int n = 0; n < s.n; ++n)
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = x.value().plane(n, c)[p] - mean;
        var += d * d;
      }
    var /= count;
    inv_std[c] = 1.0 / std::sqrt(var + eps);
    const double g = gamma.value().data()[c], b = beta.value().data()[c];
    for (int n = 0; n < s.n; ++n)
      for (std::size_t p = 0; p < plane; ++p) {
        const double xh = (x.value().plane(n, c)[p] - mean) * inv_std[c];
        xhat.plane(n, c)[p] = xh;
        out.plane(n, c)[p] = g * xh + b;
      }
  }
  return make_result(std::move(out), {x, gamma, beta},
                     [s, plane, count, xhat = std::move(xhat), inv_std](Node& self) {
                       Node* px = parent_if_grad(self, 0);
                       Node* pg = parent_if_grad(self, 1);
                       Node* pb = parent_if_grad(self, 2);
                       const Tensor& g = self.grad;
                       const double* gamma_v = self.parents[1]->value.data();
                       for (int c = 0; c < s.c; ++c) {
                         double sum_g = 0.0, sum_gx = 0.0;
                         for (int n = 0; n < s.n; ++n)
                           for (std::size_t p = 0; p < plane; ++p) {
                             sum_g += g.plane(n, c)[p];
                             sum_gx += g.plane(n, c)[p] * xhat.plane(n, c)[p];
                           }
                         if (pg) pg->grad_buffer().data()[c] += sum_gx;
                         if (pb) pb->grad_buffer().data()[c] += sum_g;
                         if (px) {
                           Tensor& gx = px->grad_buffer();
                           const double k = gamma_v[c] * inv_std[c] / count;
                           for (int n = 0; n < s.n; ++n)
                             for (std::size_t p = 0; p < plane; ++p)
                               gx.plane(n, c)[p] += k * (count * g.plane(n, c)[p] - sum_g -
                                                         xhat.plane(n, c)[p] * sum_gx);
                         }
                       }
                     });
}

Var scalar_with_grads(double value, std::vector<std::pair<Var, Tensor>> input_grads) {
  std::vector<Var> parents;
  std::vector<Tensor> grads;
  for (auto& [v, g] : input_grads) {
    require(v.shape() == g.shape(), ErrorCode::ShapeMismatch, "scalar_with_grads shape");
    parents.push_back(v);
    grads.push_back(std::move(g));
  }
  return make_result(Tensor(Shape{1, 1, 1, 1}, value), std::move(parents),
                     [grads = std::move(grads)](Node& self) {
                       const double up = self.grad.data()[0];
                       for (std::size_t i = 0; i < grads.size(); ++i)
                         if (Node* p = parent_if_grad(self, i)) {
                           Tensor& gp = p->grad_buffer();
                           for (std::size_t j = 0; j < gp.size(); ++j)
                             gp.data()[j] += up * grads[i].data()[j];
                         }
                     });
}

Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights) {
  require(scalars.size() == weights.size(), ErrorCode::InvalidArgument, "weighted_sum sizes");
  double total = 0.0;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    require(scalars[i].value().size() == 1, ErrorCode::ShapeMismatch, "weighted_sum of non-scalar");
    total += weights[i] * scalars[i].value().data()[0];
  }
  std::vector<double> w(weights.begin(), weights.end());
  return make_result(Tensor(Shape{1, 1, 1, 1}, total),
                     std::vector<Var>(scalars.begin(), scalars.end()), [w](Node& self) {
                       const double up = self.grad.data()[0];
                       for (std::size_t i = 0; i < w.size(); ++i)
                         if (Node* p = parent_if_grad(self, i))
                           p->accumulate(Tensor(p->value.shape(), up * w[i]));
                     });
}

}  // namespace desmoke::nn
