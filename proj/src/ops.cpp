// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>

namespace vxray {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
Tape<T>* recording_tape(std::initializer_list<const Tensor<T>*> inputs) {
    Tape<T>* tape = active_tape<T>();
    if (!tape) return nullptr;
    for (const Tensor<T>* t : inputs) {
        if (t->requires_grad()) return tape;
    }
    return nullptr;
}

// y[m,n] = x[m,k] * b[k,n], each row accumulated over k in order, so a row's
// result does not depend on how many rows share the call.
template <typename T>
void rowwise_product(const T* x, const T* b, T* y, int64_t m, int64_t k, int64_t n) {
    for (int64_t r = 0; r < m; ++r) {
        T* yr = y + r * n;
        const T* xr = x + r * k;
        for (int64_t i = 0; i < k; ++i) {
            const T xv = xr[i];
            const T* br = b + i * n;
            for (int64_t o = 0; o < n; ++o) yr[o] += xv * br[o];
        }
    }
}

template <typename T>
void check_finite(const Tensor<T>& out, const char* op) {
    for (T v : out.data()) {
        if (!std::isfinite(v)) throw TensorError(std::string(op) + ": non-finite value in output");
    }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw TensorError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    }
}

// Tensors are handles: a const handle still owns a mutable gradient buffer.
template <typename T>
std::span<T> grad_span(const Tensor<T>& t) {
    auto& g = t.impl()->grad;
    if (g.empty()) g.assign(t.impl()->data.size(), T(0));
    return g;
}

template <typename T>
T* grad_ptr(const Tensor<T>& t) {
    return t.requires_grad() ? grad_span(t).data() : nullptr;
}

// Shared body for unary elementwise ops: fwd(x) and dfdx(x, y).
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& a, const char* name, Fwd fwd, Deriv deriv) {
    Tensor<T> out(a.shape());
    auto x = a.data();
    auto y = out.data();
    for (size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
    check_finite(out, name);
    if (auto* tape = recording_tape({&a})) {
        out.set_requires_grad(true);
        tape->record(
            [a, out, deriv]() mutable {
                T* ga = grad_ptr(a);
                if (!ga) return;
                auto go = grad_span(out);
                auto x = a.data();
                auto y = std::as_const(out).data();
                for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * deriv(x[i], y[i]);
            },
            {out.impl()});
    }
    return out;
}

struct AxisSplit {
    int64_t outer = 1;
    int64_t extent = 1;
    int64_t inner = 1;
};

inline AxisSplit split_at(const Shape& shape, size_t axis) {
    AxisSplit s;
    for (size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.extent = shape[axis];
    for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    Tensor<T> out(a.shape());
    auto y = out.data();
    for (size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
    check_finite(out, "add");
    if (auto* tape = recording_tape({&a, &b})) {
        out.set_requires_grad(true);
        tape->record(
            [a, b, out]() mutable {
                auto go = grad_span(out);
                if (T* ga = grad_ptr(a))
                    for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
                if (T* gb = grad_ptr(b))
                    for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "sub");
    Tensor<T> out(a.shape());
    auto y = out.data();
    for (size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
    check_finite(out, "sub");
    if (auto* tape = recording_tape({&a, &b})) {
        out.set_requires_grad(true);
        tape->record(
            [a, b, out]() mutable {
                auto go = grad_span(out);
                if (T* ga = grad_ptr(a))
                    for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
                if (T* gb = grad_ptr(b))
                    for (size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mul");
    Tensor<T> out(a.shape());
    auto y = out.data();
    for (size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
    check_finite(out, "mul");
    if (auto* tape = recording_tape({&a, &b})) {
        out.set_requires_grad(true);
        tape->record(
            [a, b, out]() mutable {
                auto go = grad_span(out);
                if (T* ga = grad_ptr(a))
                    for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * b[i];
                if (T* gb = grad_ptr(b))
                    for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * a[i];
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "div");
    Tensor<T> out(a.shape());
    auto y = out.data();
    for (size_t i = 0; i < y.size(); ++i) y[i] = a[i] / b[i];
    check_finite(out, "div");
    if (auto* tape = recording_tape({&a, &b})) {
        out.set_requires_grad(true);
        tape->record(
            [a, b, out]() mutable {
                auto go = grad_span(out);
                if (T* ga = grad_ptr(a))
                    for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / b[i];
                if (T* gb = grad_ptr(b))
                    for (size_t i = 0; i < go.size(); ++i) gb[i] -= go[i] * a[i] / (b[i] * b[i]);
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
    return unary(a, "add_scalar", [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
    return unary(a, "mul_scalar", [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
    return mul_scalar(a, T(-1));
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
    return unary(a, "exp", [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
    return unary(a, "log", [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
    return unary(
        a, "abs", [](T x) { return std::abs(x); },
        [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
    return unary(a, "square", [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

namespace {
template <typename T>
T stable_sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}
}  // namespace

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    return unary(a, "sigmoid", [](T x) { return stable_sigmoid(x); },
                 [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& a) {
    return unary(
        a, "softplus", [](T x) { return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x))); },
        [](T x, T) { return stable_sigmoid(x); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
    return unary(
        a, "leaky_relu", [slope](T x) { return x > T(0) ? x : slope * x; },
        [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
    return unary(
        a, "clamp", [lo, hi](T x) { return std::clamp(x, lo, hi); },
        [lo, hi](T x, T) { return (x >= lo && x <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    double acc = 0.0;
    for (T v : a.data()) acc += static_cast<double>(v);
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
    check_finite(out, "sum");
    if (auto* tape = recording_tape({&a})) {
        out.set_requires_grad(true);
        tape->record(
            [a, out]() mutable {
                T* ga = grad_ptr(a);
                if (!ga) return;
                const T g = grad_span(out)[0];
                for (int64_t i = 0; i < a.numel(); ++i) ga[i] += g;
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    if (a.numel() == 0) throw TensorError("mean of empty tensor");
    return mul_scalar(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw TensorError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
    }
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor<T> out(Shape{m, n});
    rowwise_product(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    check_finite(out, "matmul");
    if (auto* tape = recording_tape({&a, &b})) {
        out.set_requires_grad(true);
        tape->record(
            [a, b, out, m, k, n]() mutable {
                ConstMapMat<T> go(grad_span(out).data(), m, n);
                if (T* ga = grad_ptr(a))
                    MapMat<T>(ga, m, k).noalias() +=
                        go * ConstMapMat<T>(b.data().data(), k, n).transpose();
                if (T* gb = grad_ptr(b))
                    MapMat<T>(gb, k, n).noalias() +=
                        ConstMapMat<T>(a.data().data(), m, k).transpose() * go;
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 || x.dim(1) != weight.dim(1) ||
        bias.dim(0) != weight.dim(0)) {
        throw TensorError("linear: incompatible shapes x" + shape_str(x.shape()) + " w" +
                          shape_str(weight.shape()) + " b" + shape_str(bias.shape()));
    }
    const int64_t n = x.dim(0), in = x.dim(1), outc = weight.dim(0);
    Tensor<T> out(Shape{n, outc});
    {
        const RowMat<T> wt = ConstMapMat<T>(weight.data().data(), outc, in).transpose();
        T* y = out.data().data();
        for (int64_t r = 0; r < n; ++r) std::copy(bias.data().begin(), bias.data().end(), y + r * outc);
        rowwise_product(x.data().data(), wt.data(), y, n, in, outc);
    }
    check_finite(out, "linear");
    if (auto* tape = recording_tape({&x, &weight, &bias})) {
        out.set_requires_grad(true);
        tape->record(
            [x, weight, bias, out, n, in, outc]() mutable {
                ConstMapMat<T> go(grad_span(out).data(), n, outc);
                if (T* gx = grad_ptr(x))
                    MapMat<T>(gx, n, in).noalias() +=
                        go * ConstMapMat<T>(weight.data().data(), outc, in);
                if (T* gw = grad_ptr(weight))
                    MapMat<T>(gw, outc, in).noalias() +=
                        go.transpose() * ConstMapMat<T>(x.data().data(), n, in);
                if (T* gb = grad_ptr(bias)) {
                    for (int64_t r = 0; r < n; ++r)
                        for (int64_t c = 0; c < outc; ++c) gb[c] += go(r, c);
                }
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (numel_of(shape) != a.numel()) {
        throw TensorError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    Tensor<T> out(std::move(shape), std::vector<T>(a.data().begin(), a.data().end()));
    if (auto* tape = recording_tape({&a})) {
        out.set_requires_grad(true);
        tape->record(
            [a, out]() mutable {
                T* ga = grad_ptr(a);
                if (!ga) return;
                auto go = grad_span(out);
                for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
    if (a.rank() != 2) throw TensorError("transpose2d: rank-2 input required");
    const int64_t r = a.dim(0), c = a.dim(1);
    Tensor<T> out(Shape{c, r});
    MapMat<T>(out.data().data(), c, r) = ConstMapMat<T>(a.data().data(), r, c).transpose();
    if (auto* tape = recording_tape({&a})) {
        out.set_requires_grad(true);
        tape->record(
            [a, out, r, c]() mutable {
                T* ga = grad_ptr(a);
                if (!ga) return;
                MapMat<T>(ga, r, c) += ConstMapMat<T>(grad_span(out).data(), c, r).transpose();
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, size_t axis) {
    if (parts.empty()) throw TensorError("concat: no inputs");
    const Shape& ref = parts.front().shape();
    if (axis >= ref.size()) throw TensorError("concat: axis out of range");
    Shape shape = ref;
    shape[axis] = 0;
    for (const auto& p : parts) {
        if (p.rank() != ref.size()) throw TensorError("concat: rank mismatch");
        for (size_t d = 0; d < ref.size(); ++d) {
            if (d != axis && p.dim(d) != ref[d]) {
                throw TensorError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                  shape_str(ref));
            }
        }
        shape[axis] += p.dim(axis);
    }
    Tensor<T> out(shape);
    const AxisSplit whole = split_at(shape, axis);
    {
        auto y = out.data();
        int64_t offset = 0;
        for (const auto& p : parts) {
            const int64_t block = p.dim(axis) * whole.inner;
            auto x = p.data();
            for (int64_t o = 0; o < whole.outer; ++o) {
                std::copy_n(x.begin() + o * block, block,
                            y.begin() + o * whole.extent * whole.inner + offset);
            }
            offset += block;
        }
    }
    bool any = false;
    for (const auto& p : parts) any = any || p.requires_grad();
    Tape<T>* tape = any ? active_tape<T>() : nullptr;
    if (tape) {
        out.set_requires_grad(true);
        tape->record(
            [parts, out, whole]() mutable {
                auto go = grad_span(out);
                int64_t offset = 0;
                for (auto& p : parts) {
                    const int64_t block = p.numel() / whole.outer;
                    if (T* gp = grad_ptr(p)) {
                        for (int64_t o = 0; o < whole.outer; ++o) {
                            const T* src = go.data() + o * whole.extent * whole.inner + offset;
                            T* dst = gp + o * block;
                            for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
                        }
                    }
                    offset += block;
                }
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
Tensor<T> narrow(const Tensor<T>& a, size_t axis, int64_t start, int64_t length) {
    if (axis >= a.rank() || start < 0 || length < 0 || start + length > a.dim(axis)) {
        throw TensorError("narrow: range [" + std::to_string(start) + ", " +
                          std::to_string(start + length) + ") invalid for axis " +
                          std::to_string(axis) + " of " + shape_str(a.shape()));
    }
    Shape shape = a.shape();
    shape[axis] = length;
    Tensor<T> out(shape);
    const AxisSplit s = split_at(a.shape(), axis);
    const int64_t block = length * s.inner;
    {
        auto x = a.data();
        auto y = out.data();
        for (int64_t o = 0; o < s.outer; ++o) {
            std::copy_n(x.begin() + (o * s.extent + start) * s.inner, block, y.begin() + o * block);
        }
    }
    if (auto* tape = recording_tape({&a})) {
        out.set_requires_grad(true);
        tape->record(
            [a, out, s, start, block]() mutable {
                T* ga = grad_ptr(a);
                if (!ga) return;
                auto go = grad_span(out);
                for (int64_t o = 0; o < s.outer; ++o) {
                    T* dst = ga + (o * s.extent + start) * s.inner;
                    const T* src = go.data() + o * block;
                    for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
                }
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& x, const std::vector<int64_t>& rows, int64_t n_rows) {
    if (x.rank() != 2 || static_cast<int64_t>(rows.size()) != x.dim(0)) {
        throw TensorError("scatter_rows: need [K,C] input with K row indices");
    }
    const int64_t c = x.dim(1);
    Tensor<T> out(Shape{n_rows, c});
    auto y = out.data();
    auto src = x.data();
    for (size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] < 0 || rows[k] >= n_rows) throw TensorError("scatter_rows: index out of range");
        std::copy_n(src.begin() + static_cast<int64_t>(k) * c, c, y.begin() + rows[k] * c);
    }
    if (auto* tape = recording_tape({&x})) {
        out.set_requires_grad(true);
        tape->record(
            [x, out, rows, c]() mutable {
                T* gx = grad_ptr(x);
                if (!gx) return;
                auto go = grad_span(out);
                for (size_t k = 0; k < rows.size(); ++k)
                    for (int64_t j = 0; j < c; ++j) gx[k * c + j] += go[rows[k] * c + j];
            },
            {out.impl()});
    }
    return out;
}

namespace {

struct ConvGeom {
    int64_t c_in, h, w, c_out, k, stride, pad, h_out, w_out;
    int64_t col_rows() const { return c_in * k * k; }
    int64_t col_cols() const { return h_out * w_out; }
};

template <typename T>
void im2col(const T* input, const ConvGeom& g, T* col) {
    for (int64_t c = 0; c < g.c_in; ++c) {
        for (int64_t ky = 0; ky < g.k; ++ky) {
            for (int64_t kx = 0; kx < g.k; ++kx) {
                T* row = col + ((c * g.k + ky) * g.k + kx) * g.col_cols();
                for (int64_t oy = 0; oy < g.h_out; ++oy) {
                    const int64_t iy = oy * g.stride + ky - g.pad;
                    for (int64_t ox = 0; ox < g.w_out; ++ox) {
                        const int64_t ix = ox * g.stride + kx - g.pad;
                        row[oy * g.w_out + ox] = (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w)
                                                     ? input[(c * g.h + iy) * g.w + ix]
                                                     : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, const ConvGeom& g, T* input_grad) {
    for (int64_t c = 0; c < g.c_in; ++c) {
        for (int64_t ky = 0; ky < g.k; ++ky) {
            for (int64_t kx = 0; kx < g.k; ++kx) {
                const T* row = col + ((c * g.k + ky) * g.k + kx) * g.col_cols();
                for (int64_t oy = 0; oy < g.h_out; ++oy) {
                    const int64_t iy = oy * g.stride + ky - g.pad;
                    if (iy < 0 || iy >= g.h) continue;
                    for (int64_t ox = 0; ox < g.w_out; ++ox) {
                        const int64_t ix = ox * g.stride + kx - g.pad;
                        if (ix < 0 || ix >= g.w) continue;
                        input_grad[(c * g.h + iy) * g.w + ix] += row[oy * g.w_out + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 int stride) {
    if (input.rank() != 3 || kernel.rank() != 4 || bias.rank() != 1) {
        throw TensorError("conv2d: expected input[C,H,W], kernel[O,C,k,k], bias[O]; got " +
                          shape_str(input.shape()) + ", " + shape_str(kernel.shape()) + ", " +
                          shape_str(bias.shape()));
    }
    if (kernel.dim(2) != kernel.dim(3) || kernel.dim(2) % 2 == 0) {
        throw TensorError("conv2d: kernel must be square with odd size, got " +
                          shape_str(kernel.shape()));
    }
    if (kernel.dim(1) != input.dim(0)) {
        throw TensorError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                          " input channels, input has " + std::to_string(input.dim(0)));
    }
    if (bias.dim(0) != kernel.dim(0)) throw TensorError("conv2d: bias size mismatch");
    if (stride < 1) throw TensorError("conv2d: stride must be >= 1");

    ConvGeom g{};
    g.c_in = input.dim(0);
    g.h = input.dim(1);
    g.w = input.dim(2);
    g.c_out = kernel.dim(0);
    g.k = kernel.dim(2);
    g.stride = stride;
    g.pad = g.k / 2;
    g.h_out = (g.h + 2 * g.pad - g.k) / stride + 1;
    g.w_out = (g.w + 2 * g.pad - g.k) / stride + 1;

    auto col = std::make_shared<std::vector<T>>(static_cast<size_t>(g.col_rows() * g.col_cols()));
    im2col(input.data().data(), g, col->data());

    Tensor<T> out(Shape{g.c_out, g.h_out, g.w_out});
    MapMat<T> y(out.data().data(), g.c_out, g.col_cols());
    y.noalias() = ConstMapMat<T>(kernel.data().data(), g.c_out, g.col_rows()) *
                  ConstMapMat<T>(col->data(), g.col_rows(), g.col_cols());
    y.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias.data().data(), g.c_out);
    check_finite(out, "conv2d");

    if (auto* tape = recording_tape({&input, &kernel, &bias})) {
        out.set_requires_grad(true);
        tape->record(
            [input, kernel, bias, out, col, g]() mutable {
                ConstMapMat<T> go(grad_span(out).data(), g.c_out, g.col_cols());
                if (T* gk = grad_ptr(kernel))
                    MapMat<T>(gk, g.c_out, g.col_rows()).noalias() +=
                        go * ConstMapMat<T>(col->data(), g.col_rows(), g.col_cols()).transpose();
                if (T* gb = grad_ptr(bias)) {
                    for (int64_t o = 0; o < g.c_out; ++o) {
                        T acc = T(0);
                        for (int64_t j = 0; j < g.col_cols(); ++j) acc += go(o, j);
                        gb[o] += acc;
                    }
                }
                if (T* gi = grad_ptr(input)) {
                    RowMat<T> dcol =
                        ConstMapMat<T>(kernel.data().data(), g.c_out, g.col_rows()).transpose() * go;
                    col2im_add(dcol.data(), g, gi);
                }
            },
            {out.impl()});
    }
    return out;
}

namespace {

// Source taps for 2x bilinear upsampling along one axis (half-pixel centers,
// source coordinate clamped at 0 like align_corners=false).
struct Taps {
    std::vector<int64_t> i0, i1;
    std::vector<double> w1;
};

Taps upsample_taps(int64_t n) {
    Taps t;
    const int64_t m = 2 * n;
    t.i0.resize(m);
    t.i1.resize(m);
    t.w1.resize(m);
    for (int64_t o = 0; o < m; ++o) {
        double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
        if (src < 0.0) src = 0.0;
        const int64_t lo = std::min(static_cast<int64_t>(std::floor(src)), n - 1);
        t.i0[o] = lo;
        t.i1[o] = std::min(lo + 1, n - 1);
        t.w1[o] = src - static_cast<double>(lo);
    }
    return t;
}

}  // namespace

template <typename T>
Tensor<T> upsample_bilinear2x(const Tensor<T>& input) {
    if (input.rank() != 3 || input.dim(1) < 1 || input.dim(2) < 1) {
        throw TensorError("upsample_bilinear2x: expected [C,H,W] with H,W >= 1, got " +
                          shape_str(input.shape()));
    }
    const int64_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int64_t ho = 2 * h, wo = 2 * w;
    const Taps ty = upsample_taps(h), tx = upsample_taps(w);
    Tensor<T> out(Shape{c, ho, wo});
    auto x = input.data();
    auto y = out.data();
    for (int64_t ch = 0; ch < c; ++ch) {
        const T* src = x.data() + ch * h * w;
        T* dst = y.data() + ch * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy) {
            const T wy1 = static_cast<T>(ty.w1[oy]), wy0 = T(1) - wy1;
            const T* r0 = src + ty.i0[oy] * w;
            const T* r1 = src + ty.i1[oy] * w;
            for (int64_t ox = 0; ox < wo; ++ox) {
                const T wx1 = static_cast<T>(tx.w1[ox]), wx0 = T(1) - wx1;
                dst[oy * wo + ox] = wy0 * (wx0 * r0[tx.i0[ox]] + wx1 * r0[tx.i1[ox]]) +
                                    wy1 * (wx0 * r1[tx.i0[ox]] + wx1 * r1[tx.i1[ox]]);
            }
        }
    }
    check_finite(out, "upsample_bilinear2x");
    if (auto* tape = recording_tape({&input})) {
        out.set_requires_grad(true);
        tape->record(
            [input, out, ty, tx, c, h, w, ho, wo]() mutable {
                T* gi = grad_ptr(input);
                if (!gi) return;
                auto go = grad_span(out);
                for (int64_t ch = 0; ch < c; ++ch) {
                    T* dst = gi + ch * h * w;
                    const T* src = go.data() + ch * ho * wo;
                    for (int64_t oy = 0; oy < ho; ++oy) {
                        const T wy1 = static_cast<T>(ty.w1[oy]), wy0 = T(1) - wy1;
                        T* r0 = dst + ty.i0[oy] * w;
                        T* r1 = dst + ty.i1[oy] * w;
                        for (int64_t ox = 0; ox < wo; ++ox) {
                            const T wx1 = static_cast<T>(tx.w1[ox]), wx0 = T(1) - wx1;
                            const T g = src[oy * wo + ox];
                            r0[tx.i0[ox]] += g * wy0 * wx0;
                            r0[tx.i1[ox]] += g * wy0 * wx1;
                            r1[tx.i0[ox]] += g * wy1 * wx0;
                            r1[tx.i1[ox]] += g * wy1 * wx1;
                        }
                    }
                }
            },
            {out.impl()});
    }
    return out;
}

namespace {

struct Corner8 {
    int64_t offset[8];  // element offsets of the corner voxels (channel 0)
    double weight[8];
};

// Returns false for points outside [0, N-1]^3.
template <typename T>
bool trilinear_corners(const T* p, int64_t nx, int64_t ny, int64_t nz, int64_t c, Corner8& out) {
    const int64_t dims[3] = {nx, ny, nz};
    int64_t base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        const double g = static_cast<double>(p[a]);
        if (!(g >= 0.0 && g <= static_cast<double>(dims[a] - 1))) return false;
        int64_t i = static_cast<int64_t>(std::floor(g));
        i = std::min(i, dims[a] - 2);
        base[a] = i;
        frac[a] = g - static_cast<double>(i);
    }
    int n = 0;
    for (int dx = 0; dx < 2; ++dx) {
        for (int dy = 0; dy < 2; ++dy) {
            for (int dz = 0; dz < 2; ++dz) {
                const double wx = dx ? frac[0] : 1.0 - frac[0];
                const double wy = dy ? frac[1] : 1.0 - frac[1];
                const double wz = dz ? frac[2] : 1.0 - frac[2];
                out.offset[n] = (((base[0] + dx) * ny + (base[1] + dy)) * nz + (base[2] + dz)) * c;
                out.weight[n] = wx * wy * wz;
                ++n;
            }
        }
    }
    return true;
}

}  // namespace

template <typename T>
Tensor<T> trilinear_sample(const Tensor<T>& grid, const Tensor<T>& points) {
    if (grid.rank() != 4) throw TensorError("trilinear_sample: grid must be [X,Y,Z,C]");
    const int64_t nx = grid.dim(0), ny = grid.dim(1), nz = grid.dim(2), c = grid.dim(3);
    if (nx < 2 || ny < 2 || nz < 2) {
        throw TensorError("trilinear_sample: every grid dimension must be >= 2, got " +
                          shape_str(grid.shape()));
    }
    if (points.rank() != 2 || points.dim(1) != 3) {
        throw TensorError("trilinear_sample: points must be [P,3], got " + shape_str(points.shape()));
    }
    const int64_t np = points.dim(0);
    Tensor<T> out(Shape{np, c});
    auto gv = grid.data();
    auto pv = points.data();
    auto y = out.data();
    for (int64_t i = 0; i < np; ++i) {
        Corner8 k;
        if (!trilinear_corners(pv.data() + 3 * i, nx, ny, nz, c, k)) continue;
        T* dst = y.data() + i * c;
        for (int n = 0; n < 8; ++n) {
            const T wgt = static_cast<T>(k.weight[n]);
            const T* src = gv.data() + k.offset[n];
            for (int64_t ch = 0; ch < c; ++ch) dst[ch] += wgt * src[ch];
        }
    }
    check_finite(out, "trilinear_sample");
    if (auto* tape = recording_tape({&grid})) {
        out.set_requires_grad(true);
        tape->record(
            [grid, points, out, nx, ny, nz, c, np]() mutable {
                T* gg = grad_ptr(grid);
                if (!gg) return;
                auto go = grad_span(out);
                auto pv = points.data();
                for (int64_t i = 0; i < np; ++i) {
                    Corner8 k;
                    if (!trilinear_corners(pv.data() + 3 * i, nx, ny, nz, c, k)) continue;
                    const T* src = go.data() + i * c;
                    for (int n = 0; n < 8; ++n) {
                        const T wgt = static_cast<T>(k.weight[n]);
                        T* dst = gg + k.offset[n];
                        for (int64_t ch = 0; ch < c; ++ch) dst[ch] += wgt * src[ch];
                    }
                }
            },
            {out.impl()});
    }
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> composite(const Tensor<T>& sigma, const Tensor<T>& values,
                                          const Tensor<T>& delta) {
    if (sigma.rank() != 2 || values.rank() != 3 || delta.shape() != sigma.shape() ||
        values.dim(0) != sigma.dim(0) || values.dim(1) != sigma.dim(1)) {
        throw TensorError("composite: expected sigma[R,N], values[R,N,C], delta[R,N]; got " +
                          shape_str(sigma.shape()) + ", " + shape_str(values.shape()) + ", " +
                          shape_str(delta.shape()));
    }
    const int64_t rays = sigma.dim(0), n = sigma.dim(1), c = values.dim(2);
    for (T s : sigma.data())
        if (!(s >= T(0))) throw TensorError("composite: negative density");
    for (T d : delta.data())
        if (!(d >= T(0))) throw TensorError("composite: negative sample spacing");

    Tensor<T> acc(Shape{rays, c});
    Tensor<T> residual(Shape{rays});
    {
        auto sv = sigma.data();
        auto dv = delta.data();
        auto vv = values.data();
        auto out = acc.data();
        for (int64_t r = 0; r < rays; ++r) {
            T optical = T(0);
            T* dst = out.data() + r * c;
            for (int64_t i = 0; i < n; ++i) {
                const T tau = sv[r * n + i] * dv[r * n + i];
                const T trans = std::exp(-optical);
                const T alpha = -std::expm1(-tau);
                const T wgt = trans * alpha;
                const T* v = vv.data() + (r * n + i) * c;
                for (int64_t ch = 0; ch < c; ++ch) dst[ch] += wgt * v[ch];
                optical += tau;
            }
            residual.data()[r] = std::exp(-optical);
        }
    }
    check_finite(acc, "composite");

    if (auto* tape = recording_tape({&sigma, &values})) {
        acc.set_requires_grad(true);
        residual.set_requires_grad(true);
        tape->record(
            [sigma, values, delta, acc, residual, rays, n, c]() mutable {
                T* gs = grad_ptr(sigma);
                T* gv = grad_ptr(values);
                auto go = grad_span(acc);
                auto gt = grad_span(residual);
                auto sv = sigma.data();
                auto dv = delta.data();
                auto vv = values.data();
                std::vector<T> trans_after(static_cast<size_t>(n));  // T_{i+1}
                std::vector<T> wgt(static_cast<size_t>(n));
                for (int64_t r = 0; r < rays; ++r) {
                    T optical = T(0);
                    for (int64_t i = 0; i < n; ++i) {
                        const T tau = sv[r * n + i] * dv[r * n + i];
                        wgt[i] = std::exp(-optical) * -std::expm1(-tau);
                        optical += tau;
                        trans_after[i] = std::exp(-optical);
                    }
                    const T t_end = std::exp(-optical);
                    const T* g = go.data() + r * c;
                    const T g_end = gt[r];
                    // suffix = sum_{i>k} w_i <g, v_i>
                    T suffix = T(0);
                    for (int64_t k = n - 1; k >= 0; --k) {
                        const T* v = vv.data() + (r * n + k) * c;
                        T s = T(0);
                        for (int64_t ch = 0; ch < c; ++ch) s += g[ch] * v[ch];
                        if (gv) {
                            T* dst = gv + (r * n + k) * c;
                            for (int64_t ch = 0; ch < c; ++ch) dst[ch] += wgt[k] * g[ch];
                        }
                        if (gs) {
                            gs[r * n + k] +=
                                dv[r * n + k] * (trans_after[k] * s - suffix - g_end * t_end);
                        }
                        suffix += wgt[k] * s;
                    }
                }
            },
            {acc.impl(), residual.impl()});
    }
    return {acc, residual};
}

template <typename T>
std::vector<T> composite_weights(std::span<const T> sigma, std::span<const T> delta, int64_t n) {
    if (sigma.size() != delta.size() || n <= 0 || sigma.size() % static_cast<size_t>(n) != 0) {
        throw TensorError("composite_weights: inconsistent sizes");
    }
    std::vector<T> w(sigma.size());
    const size_t rays = sigma.size() / static_cast<size_t>(n);
    for (size_t r = 0; r < rays; ++r) {
        T optical = T(0);
        for (int64_t i = 0; i < n; ++i) {
            const size_t j = r * static_cast<size_t>(n) + static_cast<size_t>(i);
            const T tau = sigma[j] * delta[j];
            w[j] = std::exp(-optical) * -std::expm1(-tau);
            optical += tau;
        }
    }
    return w;
}

#define VXRY_INSTANTIATE_OPS(T)                                                                   \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> add_scalar(const Tensor<T>&, T);                                           \
    template Tensor<T> mul_scalar(const Tensor<T>&, T);                                           \
    template Tensor<T> neg(const Tensor<T>&);                                                     \
    template Tensor<T> exp(const Tensor<T>&);                                                     \
    template Tensor<T> log(const Tensor<T>&);                                                     \
    template Tensor<T> abs(const Tensor<T>&);                                                     \
    template Tensor<T> square(const Tensor<T>&);                                                  \
    template Tensor<T> sigmoid(const Tensor<T>&);                                                 \
    template Tensor<T> softplus(const Tensor<T>&);                                                \
    template Tensor<T> leaky_relu(const Tensor<T>&, T);                                           \
    template Tensor<T> clamp(const Tensor<T>&, T, T);                                             \
    template Tensor<T> sum(const Tensor<T>&);                                                     \
    template Tensor<T> mean(const Tensor<T>&);                                                    \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                \
    template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                          \
    template Tensor<T> transpose2d(const Tensor<T>&);                                             \
    template Tensor<T> concat(const std::vector<Tensor<T>>&, size_t);                             \
    template Tensor<T> narrow(const Tensor<T>&, size_t, int64_t, int64_t);                        \
    template Tensor<T> scatter_rows(const Tensor<T>&, const std::vector<int64_t>&, int64_t);      \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);         \
    template Tensor<T> upsample_bilinear2x(const Tensor<T>&);                                     \
    template Tensor<T> trilinear_sample(const Tensor<T>&, const Tensor<T>&);                      \
    template std::pair<Tensor<T>, Tensor<T>> composite(const Tensor<T>&, const Tensor<T>&,        \
                                                       const Tensor<T>&);                         \
    template std::vector<T> composite_weights(std::span<const T>, std::span<const T>, int64_t);

VXRY_INSTANTIATE_OPS(float)
VXRY_INSTANTIATE_OPS(double)

}  // namespace vxray
