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

#include "touchmap/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include <nlohmann/json.hpp>

#include "touchmap/error.hpp"

namespace touchmap {

void DetectorConfig::validate() const {
    if (smooth_len < 1 || smooth_len % 2 == 0) throw ConfigError("detector.smooth_len must be odd and >= 1");
    if (!(energy_prominence_ratio >= 1.0)) throw ConfigError("detector.energy_prominence_ratio must be >= 1");
    if (!(flatness_min > 0.0 && flatness_min <= 1.0)) throw ConfigError("detector.flatness_min must be in (0, 1]");
    if (!(onset_ratio_min >= 1.0)) throw ConfigError("detector.onset_ratio_min must be >= 1");
    if (!(refractory_ms > 0.0)) throw ConfigError("detector.refractory_ms must be > 0");
    if (!(segment_ms > 0.0)) throw ConfigError("detector.segment_ms must be > 0");
    if (!(pre_roll_ms > 0.0)) throw ConfigError("detector.pre_roll_ms must be > 0");
    if (segment_ms < pre_roll_ms) throw ConfigError("detector.segment_ms must be >= pre_roll_ms");
    if (!(median_window_s > 0.0)) throw ConfigError("detector.median_window_s must be > 0");
}

std::vector<double> smooth(const std::vector<double>& track, int len) {
    if (len < 1 || len % 2 == 0) throw ConfigError("smooth: length must be odd and >= 1");
    const auto n = static_cast<long long>(track.size());
    const long long half = len / 2;
    std::vector<double> out(track.size());
    for (long long i = 0; i < n; ++i) {
        const long long lo = std::max(0LL, i - half);
        const long long hi = std::min(n - 1, i + half);
        double acc = 0.0;
        for (long long j = lo; j <= hi; ++j) acc += track[j];
        out[i] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

std::vector<Peak> find_peaks(const std::vector<double>& x) {
    std::vector<Peak> peaks;
    const std::size_t n = x.size();
    if (n < 3) return peaks;
    std::size_t i = 1;
    while (i + 1 < n) {
        if (!(x[i] > x[i - 1])) {
            ++i;
            continue;
        }
        // Walk over a plateau; it is a peak only if it falls off on the right.
        std::size_t j = i;
        while (j + 1 < n && x[j + 1] == x[i]) ++j;
        if (j + 1 < n && x[j + 1] < x[i]) {
            const double h = x[i];
            double left_min = h;
            for (std::size_t l = i; l-- > 0;) {
                if (x[l] > h) break;
                left_min = std::min(left_min, x[l]);
            }
            double right_min = h;
            for (std::size_t r = j + 1; r < n; ++r) {
                if (x[r] > h) break;
                right_min = std::min(right_min, x[r]);
            }
            peaks.push_back({i, h - std::max(left_min, right_min)});
        }
        i = j + 1;
    }
    return peaks;
}

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double hi = *mid;
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

double safe_ratio(double num, double den) {
    if (den > 0.0) return num / den;
    return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

} // namespace

std::pair<long long, long long> segment_bounds(double peak_time, int sample_rate, const DetectorConfig& cfg) {
    const auto len = std::llround(cfg.segment_ms * sample_rate / 1000.0);
    const auto start = std::llround((peak_time - cfg.pre_roll_ms / 1000.0) * sample_rate);
    return {start, start + len};
}

std::vector<DetectionEvent> detect_events(const Spectrogram& spec, const FeatureTracks& feats,
                                          const DetectorConfig& cfg) {
    cfg.validate();
    const std::size_t n = spec.n_frames;
    if (feats.energy.size() != n || feats.flatness.size() != n || feats.onset.size() != n)
        throw Error("detect_events: feature tracks not aligned with spectrogram frames");

    const auto envelope = smooth(feats.energy, cfg.smooth_len);
    auto peaks = find_peaks(envelope);

    // Refractory suppression runs on the raw candidate set, before any gate,
    // so that tightening a threshold can only remove events.
    const double frames_per_ms = static_cast<double>(spec.sample_rate) / spec.hop / 1000.0;
    const double refractory_frames = cfg.refractory_ms * frames_per_ms;
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
        if (a.prominence != b.prominence) return a.prominence > b.prominence;
        return a.index < b.index;
    });
    std::vector<Peak> kept;
    for (const auto& p : peaks) {
        const bool clear = std::all_of(kept.begin(), kept.end(), [&](const Peak& k) {
            const double gap = std::abs(static_cast<double>(p.index) - static_cast<double>(k.index));
            return gap >= refractory_frames;
        });
        if (clear) kept.push_back(p);
    }
    std::sort(kept.begin(), kept.end(), [](const Peak& a, const Peak& b) { return a.index < b.index; });

    const double onset_median = median_of(feats.onset);
    const auto median_half = static_cast<long long>(
        std::llround(cfg.median_window_s * spec.sample_rate / spec.hop / 2.0));
    const long long half = cfg.smooth_len / 2;
    const auto last = static_cast<long long>(n) - 1;

    std::vector<DetectionEvent> events;
    for (const auto& p : kept) {
        const auto i = static_cast<long long>(p.index);

        // (a) energy prominence relative to the local median of the envelope
        const long long m_lo = std::max(0LL, i - median_half);
        const long long m_hi = std::min(last, i + median_half);
        const double local_median =
            median_of(std::vector<double>(envelope.begin() + m_lo, envelope.begin() + m_hi + 1));
        const double prominence_ratio = safe_ratio(p.prominence, local_median);
        if (prominence_ratio < cfg.energy_prominence_ratio) continue;

        // The envelope peak is refined to the strongest raw frame under the
        // smoothing kernel; the remaining gates are read there.
        const long long lo = std::max(0LL, i - half);
        const long long hi = std::min(last, i + half);
        long long r = lo;
        for (long long j = lo; j <= hi; ++j)
            if (feats.energy[j] > feats.energy[r]) r = j;

        // (b) wide-band: spectral flatness at the refined peak
        const double flat = feats.flatness[r];
        if (flat < cfg.flatness_min) continue;

        // (c) onset strength near the peak relative to the clip's median onset
        double onset = 0.0;
        for (long long j = lo; j <= hi; ++j) onset = std::max(onset, feats.onset[j]);
        const double onset_ratio = safe_ratio(onset, onset_median);
        if (onset_ratio < cfg.onset_ratio_min) continue;

        // Parabolic interpolation on the raw energy for sub-frame timing.
        double offset = 0.0;
        if (r > 0 && r < last) {
            const double a = feats.energy[r - 1], b = feats.energy[r], c = feats.energy[r + 1];
            const double denom = a - 2.0 * b + c;
            if (denom < 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
        }

        DetectionEvent ev;
        ev.peak_frame = static_cast<std::size_t>(r);
        ev.peak_time = spec.frame_time(static_cast<double>(r) + offset);
        ev.energy_prominence = prominence_ratio;
        ev.flatness_at_peak = flat;
        ev.onset_ratio = onset_ratio;
        std::tie(ev.segment_start, ev.segment_end) = segment_bounds(ev.peak_time, spec.sample_rate, cfg);
        events.push_back(ev);
    }
    return events;
}

std::vector<DetectionEvent> detect_clip(const AudioClip& clip, const DetectorConfig& cfg, const StftConfig& stft_cfg) {
    const auto spec = stft(clip, stft_cfg);
    const auto feats = compute_features(clip, spec);
    return detect_events(spec, feats, cfg);
}

AudioClip extract_segment(const AudioClip& clip, const DetectionEvent& ev, const DetectorConfig& cfg) {
    const auto [start, end] = segment_bounds(ev.peak_time, clip.sample_rate, cfg);
    AudioClip seg;
    seg.sample_rate = clip.sample_rate;
    seg.samples.assign(static_cast<std::size_t>(end - start), 0.0);
    const auto n = static_cast<long long>(clip.samples.size());
    for (long long s = std::max(0LL, start); s < std::min(end, n); ++s)
        seg.samples[static_cast<std::size_t>(s - start)] = clip.samples[static_cast<std::size_t>(s)];
    return seg;
}

std::string event_to_json_line(const std::string& clip_id, const DetectionEvent& ev, int sample_rate) {
    nlohmann::ordered_json j;
    j["clip_id"] = clip_id;
    j["peak_time_s"] = ev.peak_time;
    j["prominence"] = ev.energy_prominence;
    j["flatness"] = ev.flatness_at_peak;
    j["onset_ratio"] = ev.onset_ratio;
    j["segment_start_s"] = static_cast<double>(ev.segment_start) / sample_rate;
    j["segment_end_s"] = static_cast<double>(ev.segment_end) / sample_rate;
    return j.dump();
}

EventRecord parse_event_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        EventRecord r;
        r.clip_id = j.at("clip_id").get<std::string>();
        r.peak_time_s = j.at("peak_time_s").get<double>();
        // Unbounded ratios (zero median) serialize as null.
        const auto ratio = [&](const char* key) {
            const auto& v = j.at(key);
            return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
        };
        r.prominence = ratio("prominence");
        r.flatness = j.at("flatness").get<double>();
        r.onset_ratio = ratio("onset_ratio");
        r.segment_start_s = j.at("segment_start_s").get<double>();
        r.segment_end_s = j.at("segment_end_s").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad event record: ") + e.what());
    }
}

} // namespace touchmap
