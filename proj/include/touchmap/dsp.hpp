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

#include <cstddef>
#include <span>
#include <vector>

#include "touchmap/audio.hpp"

namespace touchmap {

struct StftConfig {
    int window = 480;    // 30 ms @ 16 kHz
    int hop = 160;       // 10 ms
    int fft_size = 512;
    // Zero-pad the tail so every hop start inside the clip yields a frame
    // (3200 samples -> 20 frames instead of 18).
    bool pad_end = true;
};

/// Magnitude STFT |X[k,n]|, stored frame-major: each frame's bins are contiguous.
struct Spectrogram {
    std::vector<double> mag;
    std::size_t n_bins = 0;
    std::size_t n_frames = 0;
    int hop = 160;
    int window = 480;
    int fft_size = 512;
    int sample_rate = kPipelineSampleRate;

    double at(std::size_t bin, std::size_t frame) const { return mag[frame * n_bins + bin]; }
    double& at(std::size_t bin, std::size_t frame) { return mag[frame * n_bins + bin]; }
    std::span<const double> frame(std::size_t n) const { return {mag.data() + n * n_bins, n_bins}; }
    std::span<double> frame(std::size_t n) { return {mag.data() + n * n_bins, n_bins}; }

    double bin_frequency(std::size_t bin) const {
        return static_cast<double>(bin) * sample_rate / fft_size;
    }
    /// Time of the centre of frame n, in seconds.
    double frame_time(double n) const { return (n * hop + window / 2.0) / sample_rate; }

    /// Empty spectrogram with the given geometry and zero magnitudes.
    static Spectrogram zeros(std::size_t n_bins, std::size_t n_frames, int sample_rate = kPipelineSampleRate);
};

/// The five per-frame tracks, all of length n_frames.
struct FeatureTracks {
    std::vector<double> energy;
    std::vector<double> flatness;
    std::vector<double> onset;
    std::vector<double> centroid;
    std::vector<double> zcr;

    std::size_t size() const { return energy.size(); }
};

inline constexpr double kFlatnessFloor = 1e-10;
inline constexpr double kLogMagnitudeFloor = 1e-5;

std::vector<double> hann_window(int length);

/// Hann-windowed, zero-padded magnitude STFT. Frame n covers samples
/// [n*hop, n*hop + window).
Spectrogram stft(const AudioClip& clip, const StftConfig& cfg = {});

/// Number of frames stft() produces for a clip of `length` samples.
std::size_t stft_frame_count(std::size_t length, const StftConfig& cfg);

/// E[n] = sum_k |X[k,n]|.
std::vector<double> energy_contour(const Spectrogram& spec);

/// Geometric over arithmetic mean of (|X[k,n]| + floor) per frame; in [0, 1].
std::vector<double> spectral_flatness(const Spectrogram& spec, double floor = kFlatnessFloor);

/// O[n] = sum_k H(|X[k,n]| - |X[k,n-1]|), H(x) = (|x| + x) / 2; O[0] = 0.
std::vector<double> onset_strength(const Spectrogram& spec);

/// Magnitude-weighted mean bin frequency in Hz; 0 for an all-zero frame.
std::vector<double> spectral_centroid(const Spectrogram& spec);

/// Fraction of adjacent-sample sign changes about each frame's mean.
/// Frames start every `hop` samples and are dropped when they would overrun.
std::vector<double> zero_crossing_rate(const AudioClip& clip, int frame, int hop);

/// Elementwise ln(mag + floor), same layout as spec.mag.
std::vector<double> log_magnitude(const Spectrogram& spec, double floor = kLogMagnitudeFloor);

/// All tracks aligned with spec's frames. The clip is zero-padded for the
/// zero-crossing track so padded spectrogram frames line up.
FeatureTracks compute_features(const AudioClip& clip, const Spectrogram& spec,
                               double flatness_floor = kFlatnessFloor);

} // namespace touchmap
