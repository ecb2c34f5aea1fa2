// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vxray/tensor.hpp"

namespace vxray {

struct GradCheckOptions {
    double step = 1e-4;
    /// Coordinates checked per input tensor; -1 checks every coordinate.
    /// Subsets are drawn deterministically from `seed`.
    int64_t max_coords_per_input = -1;
    uint64_t seed = 0;
};

using ScalarFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

/// Maximum over checked coordinates of |g_a - g_fd| / max(1, |g_a|, |g_fd|),
/// where g_a comes from the tape and g_fd from central differences.
/// Throws TensorError if either gradient is NaN.
double grad_check(const ScalarFn& f, std::vector<Tensor<double>> inputs,
                  const GradCheckOptions& options = {});

}  // namespace vxray
