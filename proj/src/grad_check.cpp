// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vxray/rng.hpp"

namespace vxray {

double grad_check(const ScalarFn& f, std::vector<Tensor<double>> inputs,
                  const GradCheckOptions& options) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    std::vector<std::vector<double>> analytic;
    {
        Tape<double> tape;
        TapeScope<double> scope(tape);
        Tensor<double> y = f(inputs);
        tape.backward(y);
    }
    for (auto& t : inputs) {
        auto g = t.grad();
        analytic.emplace_back(g.begin(), g.end());
    }

    auto eval = [&]() {
        NoGradScope<double> off;
        return f(inputs).item();
    };

    Rng rng(options.seed);
    double worst = 0.0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        auto values = inputs[k].data();
        std::vector<size_t> coords(values.size());
        std::iota(coords.begin(), coords.end(), size_t{0});
        if (options.max_coords_per_input >= 0 &&
            coords.size() > static_cast<size_t>(options.max_coords_per_input)) {
            for (size_t i = 0; i < static_cast<size_t>(options.max_coords_per_input); ++i) {
                std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
            }
            coords.resize(static_cast<size_t>(options.max_coords_per_input));
        }
        for (size_t i : coords) {
            const double saved = values[i];
            values[i] = saved + options.step;
            const double up = eval();
            values[i] = saved - options.step;
            const double down = eval();
            values[i] = saved;
            const double fd = (up - down) / (2.0 * options.step);
            const double ga = analytic[k][i];
            if (std::isnan(fd) || std::isnan(ga)) {
                throw TensorError("grad_check: NaN gradient at input " + std::to_string(k) +
                                  ", coordinate " + std::to_string(i));
            }
            const double err = std::abs(ga - fd) / std::max({1.0, std::abs(ga), std::abs(fd)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace vxray
