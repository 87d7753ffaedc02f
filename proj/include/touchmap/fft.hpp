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

#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace touchmap {

/// Complex DFT of a fixed length, backed by Eigen's FFT module. A plan
/// keeps scratch space, so use one plan per thread.
class FftPlan {
public:
    explicit FftPlan(std::size_t n);
    ~FftPlan();
    FftPlan(FftPlan&&) noexcept;
    FftPlan& operator=(FftPlan&&) noexcept;

    std::size_t size() const { return n_; }

    /// In-place forward transform (e^{-i...} kernel, no scaling).
    void forward(std::span<std::complex<double>> data) const;
    /// In-place inverse transform, scaled by 1/n.
    void inverse(std::span<std::complex<double>> data) const;

    /// Magnitudes of bins 0..n/2 of the real input zero-padded to n.
    void real_magnitude(std::span<const double> input, std::span<double> mag_out) const;

private:
    struct Impl;
    std::size_t n_;
    std::unique_ptr<Impl> impl_;
};

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

} // namespace touchmap
