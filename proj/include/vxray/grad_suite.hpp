// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vxray {

struct GradSuiteResult {
    std::string module;
    std::string name;
    int instances = 0;
    double max_error = 0.0;  // worst relative error over all instances
};

/// Module names accepted by run_grad_suite, besides "all".
std::vector<std::string> grad_suite_modules();

/// Central finite-difference checks in 64-bit arithmetic of every
/// differentiable operation and the end-to-end training paths, each on
/// `instances` random instances. Throws std::invalid_argument for an unknown
/// module.
std::vector<GradSuiteResult> run_grad_suite(const std::string& module = "all", int instances = 20,
                                            uint64_t seed = 0);

}  // namespace vxray
