// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace vxray {

int64_t numel_of(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw TensorError("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<TensorImpl<T>>()) {
    const int64_t n = numel_of(shape);
    impl_->shape = std::move(shape);
    impl_->data.assign(static_cast<size_t>(n), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<TensorImpl<T>>()) {
    if (numel_of(shape) != static_cast<int64_t>(values.size())) {
        throw TensorError("tensor data length " + std::to_string(values.size()) +
                          " does not match shape " + shape_str(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) throw TensorError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
    impl_->requires_grad = flag;
    return *this;
}

template <typename T>
std::span<T> Tensor<T>::grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
    return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
    Tensor out(impl_->shape, impl_->data);
    out.impl_->requires_grad = impl_->requires_grad;
    return out;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    return Tensor(impl_->shape, impl_->data);
}

template <typename T>
void Tape<T>::record(Backward fn, std::vector<std::shared_ptr<TensorImpl<T>>> outputs) {
    ops_.push_back(std::move(fn));
    for (auto& o : outputs) intermediates_.push_back(std::move(o));
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& root) {
    if (root.numel() != 1) {
        throw TensorError("backward() needs a one-element root, got " + shape_str(root.shape()));
    }
    for (auto& impl : intermediates_) std::fill(impl->grad.begin(), impl->grad.end(), T(0));
    Tensor<T> r = root;
    r.grad()[0] += T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

template <typename T>
void Tape<T>::clear() {
    ops_.clear();
    intermediates_.clear();
}

namespace {
template <typename T>
Tape<T>*& tape_slot() {
    thread_local Tape<T>* slot = nullptr;
    return slot;
}
}  // namespace

template <typename T>
Tape<T>* active_tape() {
    return tape_slot<T>();
}

template <typename T>
TapeScope<T>::TapeScope(Tape<T>& tape) : previous_(tape_slot<T>()) {
    tape_slot<T>() = &tape;
}

template <typename T>
TapeScope<T>::~TapeScope() {
    tape_slot<T>() = previous_;
}

template <typename T>
NoGradScope<T>::NoGradScope() : previous_(tape_slot<T>()) {
    tape_slot<T>() = nullptr;
}

template <typename T>
NoGradScope<T>::~NoGradScope() {
    tape_slot<T>() = previous_;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;
template class NoGradScope<float>;
template class NoGradScope<double>;
template Tape<float>* active_tape<float>();
template Tape<double>* active_tape<double>();

}  // namespace vxray
