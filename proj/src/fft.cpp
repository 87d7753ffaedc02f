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

#include "touchmap/fft.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/FFT>

#include "touchmap/error.hpp"

namespace touchmap {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

struct FftPlan::Impl {
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> in, out;
    std::vector<double> real_in;
};

FftPlan::FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw Error("FFT size must be positive");
    impl_ = std::make_unique<Impl>();
    impl_->in.resize(n);
    impl_->out.resize(n);
    impl_->real_in.resize(n);
}

FftPlan::~FftPlan() = default;
FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

void FftPlan::forward(std::span<std::complex<double>> data) const {
    if (data.size() != n_) throw Error("FFT input size mismatch");
    if (n_ == 1) return;  // identity; kissfft does not handle length 1
    auto& m = *impl_;
    std::copy(data.begin(), data.end(), m.in.begin());
    m.fft.fwd(m.out.data(), m.in.data(), static_cast<Eigen::Index>(n_));
    std::copy(m.out.begin(), m.out.end(), data.begin());
}

void FftPlan::inverse(std::span<std::complex<double>> data) const {
    if (data.size() != n_) throw Error("FFT input size mismatch");
    if (n_ == 1) return;
    auto& m = *impl_;
    std::copy(data.begin(), data.end(), m.in.begin());
    m.fft.inv(m.out.data(), m.in.data(), static_cast<Eigen::Index>(n_));  // scales by 1/n
    std::copy(m.out.begin(), m.out.end(), data.begin());
}

void FftPlan::real_magnitude(std::span<const double> input, std::span<double> mag_out) const {
    if (input.size() > n_) throw Error("FFT input longer than transform size");
    if (mag_out.size() != n_ / 2 + 1) throw Error("FFT magnitude output has wrong size");
    if (n_ == 1) {
        mag_out[0] = input.empty() ? 0.0 : std::abs(input[0]);
        return;
    }
    auto& m = *impl_;
    std::copy(input.begin(), input.end(), m.real_in.begin());
    std::fill(m.real_in.begin() + static_cast<std::ptrdiff_t>(input.size()), m.real_in.end(), 0.0);
    m.fft.fwd(m.out.data(), m.real_in.data(), static_cast<Eigen::Index>(n_));
    for (std::size_t k = 0; k < mag_out.size(); ++k) mag_out[k] = std::abs(m.out[k]);
}

} // namespace touchmap
