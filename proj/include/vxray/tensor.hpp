// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vxray {

using Shape = std::vector<int64_t>;

int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Thrown for contract violations on tensor operations (shape mismatch,
/// invalid argument, non-finite values).
class TensorError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until first accumulation
    bool requires_grad = false;
};

/// Dense row-major tensor with shared ownership of its storage. Copies of a
/// Tensor alias the same buffer; use clone() for a deep copy.
template <typename T>
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0));
    Tensor(Shape shape, std::vector<T> values);

    static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

    bool defined() const { return static_cast<bool>(impl_); }
    const Shape& shape() const { return impl_->shape; }
    int64_t dim(size_t axis) const { return impl_->shape.at(axis); }
    size_t rank() const { return impl_->shape.size(); }
    int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

    std::span<T> data() { return impl_->data; }
    std::span<const T> data() const { return impl_->data; }
    T item() const;
    T operator[](int64_t i) const { return impl_->data[static_cast<size_t>(i)]; }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    Tensor& set_requires_grad(bool flag);

    bool has_grad() const { return !impl_->grad.empty(); }
    /// Gradient buffer, allocated (zero-filled) on first access.
    std::span<T> grad();
    std::span<const T> grad() const { return impl_->grad; }
    void zero_grad();

    Tensor clone() const;
    /// Copy of the values that is never connected to a tape.
    Tensor detach() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
    const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }

  private:
    std::shared_ptr<TensorImpl<T>> impl_;
};

/// Ordered record of differentiable operations. backward() replays the
/// recorded closures in exact reverse order of execution, so gradient
/// accumulation order is fixed and results are reproducible bit for bit.
template <typename T>
class Tape {
  public:
    using Backward = std::function<void()>;

    void record(Backward fn, std::vector<std::shared_ptr<TensorImpl<T>>> outputs);
    /// Seeds d(root)/d(root) = 1 for a one-element root and propagates.
    /// Intermediate gradients are reset first, so the tape can be replayed.
    void backward(const Tensor<T>& root);
    void clear();
    size_t size() const { return ops_.size(); }

  private:
    std::vector<Backward> ops_;
    std::vector<std::shared_ptr<TensorImpl<T>>> intermediates_;
};

/// Active tape for the calling thread, or nullptr when gradients are off.
template <typename T>
Tape<T>* active_tape();

/// Makes a tape active on this thread for the lifetime of the scope.
template <typename T>
class TapeScope {
  public:
    explicit TapeScope(Tape<T>& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape<T>* previous_;
};

/// Disables recording on this thread for the lifetime of the scope.
template <typename T>
class NoGradScope {
  public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

  private:
    Tape<T>* previous_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template class TapeScope<float>;
extern template class TapeScope<double>;
extern template class NoGradScope<float>;
extern template class NoGradScope<double>;

}  // namespace vxray
