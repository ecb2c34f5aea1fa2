// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "vxray/rng.hpp"
#include "vxray/tensor.hpp"

namespace vxray::testing {

template <typename T = double>
Tensor<T> random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

/// Uniform in [lo, hi] but at least `margin` away from zero.
template <typename T = double>
Tensor<T> random_away_from_zero(Rng& rng, Shape shape, double lo, double hi, double margin) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data()) {
        double x;
        do {
            x = rng.uniform(lo, hi);
        } while (std::abs(x) < margin);
        v = static_cast<T>(x);
    }
    return t;
}

template <typename T>
double max_abs_diff(std::span<const T> a, std::span<const T> b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

}  // namespace vxray::testing
