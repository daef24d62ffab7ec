// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace desmoke {

/// Cache-line aligned storage. Vectorized kernels split their loops by
/// address, so a fixed alignment keeps results bit-identical across runs.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using DoubleBuffer = std::vector<double, AlignedAllocator<double>>;

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense NCHW array of doubles with value semantics. Images, feature maps,
/// flow fields and network activations all live in this container.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::span<const double> data);

  static Tensor zeros(Shape s) { return Tensor(s, 0.0); }
  static Tensor ones(Shape s) { return Tensor(s, 1.0); }

  const Shape& shape() const noexcept { return shape_; }
  int n() const noexcept { return shape_.n; }
  int c() const noexcept { return shape_.c; }
  int h() const noexcept { return shape_.h; }
  int w() const noexcept { return shape_.w; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  DoubleBuffer& vec() noexcept { return data_; }
  const DoubleBuffer& vec() const noexcept { return data_; }

  std::size_t index(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) *
               shape_.w +
           x;
  }
  double& at(int n, int c, int y, int x) noexcept {
    return data_[index(n, c, y, x)];
  }
  double at(int n, int c, int y, int x) const noexcept {
    return data_[index(n, c, y, x)];
  }

  /// Pointer to channel plane (n, c).
  double* plane(int n, int c) noexcept { return data_.data() + index(n, c, 0, 0); }
  const double* plane(int n, int c) const noexcept {
    return data_.data() + index(n, c, 0, 0);
  }

  /// Copy of batch item `i` as a (1,C,H,W) tensor.
  Tensor item(int i) const;
  void set_item(int i, const Tensor& src);

  void fill(double v);
  bool all_finite() const noexcept;
  double sum() const noexcept;
  double abs_max() const noexcept;

 private:
  Shape shape_{};
  DoubleBuffer data_;
};

/// Stacks (1,C,H,W) tensors along the batch axis.
Tensor stack(std::span<const Tensor> items);

/// Concatenates along the channel axis; all inputs share N, H, W.
Tensor concat_channels(std::span<const Tensor> parts);

/// Max absolute element-wise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace desmoke
