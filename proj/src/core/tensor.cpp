// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "desmoke/error.hpp"

namespace desmoke {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {
  require(shape.n >= 0 && shape.c >= 0 && shape.h >= 0 && shape.w >= 0,
          ErrorCode::InvalidArgument, "negative tensor dimension");
}

Tensor::Tensor(Shape shape, std::span<const double> data)
    : shape_(shape), data_(data.begin(), data.end()) {
  require(data_.size() == shape.numel(), ErrorCode::ShapeMismatch,
          "tensor data size does not match shape " + shape.str());
}

Tensor Tensor::item(int i) const {
  require(i >= 0 && i < shape_.n, ErrorCode::InvalidArgument, "batch index out of range");
  const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
  Shape s{1, shape_.c, shape_.h, shape_.w};
  return Tensor(s, std::vector<double>(data_.begin() + i * per,
                                       data_.begin() + (i + 1) * per));
}

void Tensor::set_item(int i, const Tensor& src) {
  require(src.n() == 1 && src.c() == c() && src.h() == h() && src.w() == w(),
          ErrorCode::ShapeMismatch, "set_item shape " + src.shape().str());
  const std::size_t per = src.size();
  std::copy(src.vec().begin(), src.vec().end(), data_.begin() + i * per);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::sum() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor::abs_max() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor stack(std::span<const Tensor> items) {
  require(!items.empty(), ErrorCode::InvalidArgument, "stack of nothing");
  const Shape s0 = items.front().shape();
  Tensor out(Shape{static_cast<int>(items.size()), s0.c, s0.h, s0.w});
  for (std::size_t i = 0; i < items.size(); ++i) {
    require(items[i].n() == 1 && items[i].c() == s0.c && items[i].h() == s0.h &&
                items[i].w() == s0.w,
            ErrorCode::ShapeMismatch, "stack: inconsistent item shapes");
    out.set_item(static_cast<int>(i), items[i]);
  }
  return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  require(!parts.empty(), ErrorCode::InvalidArgument, "concat of nothing");
  const Shape s0 = parts.front().shape();
  int c_total = 0;
  for (const auto& p : parts) {
    require(p.n() == s0.n && p.h() == s0.h && p.w() == s0.w, ErrorCode::ShapeMismatch,
            "concat_channels: " + p.shape().str() + " vs " + s0.str());
    c_total += p.c();
  }
  Tensor out(Shape{s0.n, c_total, s0.h, s0.w});
  const std::size_t plane = s0.plane();
  for (int n = 0; n < s0.n; ++n) {
    double* dst = out.plane(n, 0);
    for (const auto& p : parts) {
      const std::size_t count = static_cast<std::size_t>(p.c()) * plane;
      std::copy_n(p.plane(n, 0), count, dst);
      dst += count;
    }
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), ErrorCode::ShapeMismatch,
          "max_abs_diff: " + a.shape().str() + " vs " + b.shape().str());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace desmoke
