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

#include "touchmap/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "touchmap/error.hpp"
#include "touchmap/fft.hpp"

namespace touchmap {

Spectrogram Spectrogram::zeros(std::size_t n_bins, std::size_t n_frames, int sample_rate) {
    Spectrogram s;
    s.n_bins = n_bins;
    s.n_frames = n_frames;
    s.fft_size = static_cast<int>(2 * (n_bins - 1));
    s.sample_rate = sample_rate;
    s.mag.assign(n_bins * n_frames, 0.0);
    return s;
}

std::vector<double> hann_window(int length) {
    // Periodic Hann, the usual choice for overlapped analysis.
    std::vector<double> w(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / length);
    return w;
}

std::size_t stft_frame_count(std::size_t length, const StftConfig& cfg) {
    const auto win = static_cast<std::size_t>(cfg.window);
    const auto hop = static_cast<std::size_t>(cfg.hop);
    if (length < win) return 0;
    if (cfg.pad_end) return (length + hop - 1) / hop;
    return (length - win) / hop + 1;
}

Spectrogram stft(const AudioClip& clip, const StftConfig& cfg) {
    if (cfg.hop < 1) throw ConfigError("stft: hop must be >= 1");
    if (cfg.window < 1) throw ConfigError("stft: window must be >= 1");
    if (cfg.window > cfg.fft_size)
        throw ConfigError("stft: window (" + std::to_string(cfg.window) + ") exceeds fft_size (" +
                          std::to_string(cfg.fft_size) + ")");
    if (clip.sample_rate <= 0) throw Error("stft: sample_rate must be positive");
    if (clip.samples.size() < static_cast<std::size_t>(cfg.window))
        throw Error("stft: clip shorter than one window (" + std::to_string(clip.samples.size()) + " < " +
                    std::to_string(cfg.window) + " samples)");

    Spectrogram spec;
    spec.hop = cfg.hop;
    spec.window = cfg.window;
    spec.fft_size = cfg.fft_size;
    spec.sample_rate = clip.sample_rate;
    spec.n_bins = static_cast<std::size_t>(cfg.fft_size) / 2 + 1;
    spec.n_frames = stft_frame_count(clip.samples.size(), cfg);
    spec.mag.assign(spec.n_bins * spec.n_frames, 0.0);

    const FftPlan plan(static_cast<std::size_t>(cfg.fft_size));
    const auto window = hann_window(cfg.window);
    std::vector<double> frame(static_cast<std::size_t>(cfg.window));
    for (std::size_t n = 0; n < spec.n_frames; ++n) {
        const std::size_t start = n * static_cast<std::size_t>(cfg.hop);
        for (std::size_t i = 0; i < frame.size(); ++i) {
            const std::size_t idx = start + i;
            frame[i] = idx < clip.samples.size() ? clip.samples[idx] * window[i] : 0.0;
        }
        plan.real_magnitude(frame, spec.frame(n));
    }
    return spec;
}

std::vector<double> energy_contour(const Spectrogram& spec) {
    std::vector<double> e(spec.n_frames, 0.0);
    for (std::size_t n = 0; n < spec.n_frames; ++n) {
        double acc = 0.0;
        for (double m : spec.frame(n)) acc += m;
        e[n] = acc;
    }
    return e;
}

std::vector<double> spectral_flatness(const Spectrogram& spec, double floor) {
    if (!(floor > 0.0)) throw ConfigError("spectral_flatness: floor must be > 0");
    std::vector<double> sf(spec.n_frames, 0.0);
    const auto nb = static_cast<double>(spec.n_bins);
    for (std::size_t n = 0; n < spec.n_frames; ++n) {
        double log_sum = 0.0;
        double sum = 0.0;
        for (double m : spec.frame(n)) {
            log_sum += std::log(m + floor);
            sum += m + floor;
        }
        const double geo = std::exp(log_sum / nb);
        const double arith = sum / nb;
        sf[n] = std::clamp(geo / arith, 0.0, 1.0);
    }
    return sf;
}

std::vector<double> onset_strength(const Spectrogram& spec) {
    std::vector<double> o(spec.n_frames, 0.0);
    for (std::size_t n = 1; n < spec.n_frames; ++n) {
        const auto cur = spec.frame(n);
        const auto prev = spec.frame(n - 1);
        double acc = 0.0;
        for (std::size_t k = 0; k < spec.n_bins; ++k) {
            const double d = cur[k] - prev[k];
            acc += (std::abs(d) + d) / 2.0;
        }
        o[n] = acc;
    }
    return o;
}

std::vector<double> spectral_centroid(const Spectrogram& spec) {
    std::vector<double> c(spec.n_frames, 0.0);
    for (std::size_t n = 0; n < spec.n_frames; ++n) {
        const auto f = spec.frame(n);
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < spec.n_bins; ++k) {
            num += spec.bin_frequency(k) * f[k];
            den += f[k];
        }
        c[n] = den > 0.0 ? num / den : 0.0;
    }
    return c;
}

namespace {

double frame_zcr(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    int last_sign = 0;
    std::size_t crossings = 0;
    for (double v : x) {
        const double d = v - mean;
        const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (s == 0) continue;
        if (last_sign != 0 && s != last_sign) ++crossings;
        last_sign = s;
    }
    return static_cast<double>(crossings) / static_cast<double>(x.size() - 1);
}

} // namespace

std::vector<double> zero_crossing_rate(const AudioClip& clip, int frame, int hop) {
    if (frame < 1 || hop < 1) throw ConfigError("zero_crossing_rate: frame and hop must be >= 1");
    const auto len = clip.samples.size();
    const auto fr = static_cast<std::size_t>(frame);
    if (fr > len) throw Error("zero_crossing_rate: frame longer than clip");
    const std::size_t n_frames = (len - fr) / static_cast<std::size_t>(hop) + 1;
    std::vector<double> z(n_frames);
    const std::span<const double> all(clip.samples);
    for (std::size_t n = 0; n < n_frames; ++n) z[n] = frame_zcr(all.subspan(n * hop, fr));
    return z;
}

std::vector<double> log_magnitude(const Spectrogram& spec, double floor) {
    if (!(floor > 0.0)) throw ConfigError("log_magnitude: floor must be > 0");
    std::vector<double> out(spec.mag.size());
    std::transform(spec.mag.begin(), spec.mag.end(), out.begin(), [floor](double m) { return std::log(m + floor); });
    return out;
}

FeatureTracks compute_features(const AudioClip& clip, const Spectrogram& spec, double flatness_floor) {
    FeatureTracks t;
    t.energy = energy_contour(spec);
    t.flatness = spectral_flatness(spec, flatness_floor);
    t.onset = onset_strength(spec);
    t.centroid = spectral_centroid(spec);

    const std::size_t needed = (spec.n_frames - 1) * static_cast<std::size_t>(spec.hop) + spec.window;
    if (clip.samples.size() >= needed) {
        t.zcr = zero_crossing_rate(clip, spec.window, spec.hop);
        t.zcr.resize(spec.n_frames);
    } else {
        AudioClip padded = clip;
        padded.samples.resize(needed, 0.0);
        t.zcr = zero_crossing_rate(padded, spec.window, spec.hop);
    }
    return t;
}

} // namespace touchmap
