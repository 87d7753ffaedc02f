/*
 Copyright 2026 The touchmap Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// Central-difference gradient check for the regressor network.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "touchmap/regressor.hpp"

namespace touchmap::testing {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;  // draws discarded because p +- h switched a ReLU or pool winner
    std::vector<std::string> layers_covered;
    std::string worst_param;
};

// Which side of every ReLU each unit is on, and every pool winner.
template <typename T>
std::vector<std::uint32_t> activation_pattern(const Workspace<T>& ws) {
    std::vector<std::uint32_t> out;
    for (const auto& layer : ws.pre)
        for (T v : layer) out.push_back(v > T(0) ? 1u : 0u);
    for (const auto& layer : ws.argmax) out.insert(out.end(), layer.begin(), layer.end());
    return out;
}

inline double relative_error(double a, double b) {
    const double denom = std::max(std::abs(a) + std::abs(b), 1e-10);
    return std::abs(a - b) / denom;
}

/// Samples `count` parameters, round-robin over tensors so every layer is
/// covered, and compares the analytic gradient with central differences.
inline GradCheckResult gradient_check(Network<double>& net, const std::vector<double>& input,
                                      const std::array<double, 2>& target, std::size_t count, double h,
                                      std::uint64_t seed) {
    GradCheckResult res;
    Workspace<double> ws;
    std::vector<double> grad(net.params().size(), 0.0);
    net.accumulate_gradient(input, target, grad, ws);
    const auto base = activation_pattern(ws);
    auto loss_at = [&](std::vector<std::uint32_t>& pattern) {
        Workspace<double> w;
        const auto y = net.forward(input, w);
        pattern = activation_pattern(w);
        return (y[0] - target[0]) * (y[0] - target[0]) + (y[1] - target[1]) * (y[1] - target[1]);
    };

    std::mt19937_64 rng(seed);
    const auto& tensors = net.tensors();
    std::size_t attempts = 0;
    for (std::size_t s = 0; res.checked < count; ++s) {
        if (++attempts > 50 * count) break;
        const auto& t = tensors[s % tensors.size()];
        const std::size_t idx = t.offset + std::uniform_int_distribution<std::size_t>(0, t.size - 1)(rng);
        double& p = net.params()[idx];
        const double saved = p;
        std::vector<std::uint32_t> pat_plus, pat_minus;
        p = saved + h;
        const double lp = loss_at(pat_plus);
        p = saved - h;
        const double lm = loss_at(pat_minus);
        p = saved;
        if (pat_plus != base || pat_minus != base) {
            ++res.skipped_kinks;
            continue;
        }
        const double fd = (lp - lm) / (2.0 * h);
        const double err = relative_error(fd, grad[idx]);
        if (err > res.max_rel_error) {
            res.max_rel_error = err;
            res.worst_param = t.name + "[" + std::to_string(idx - t.offset) + "]";
        }
        if (std::find(res.layers_covered.begin(), res.layers_covered.end(), t.name) == res.layers_covered.end())
            res.layers_covered.push_back(t.name);
        ++res.checked;
    }
    return res;
}

} // namespace touchmap::testing
