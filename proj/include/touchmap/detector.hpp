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
#include <iosfwd>
#include <string>
#include <vector>

#include "touchmap/audio.hpp"
#include "touchmap/dsp.hpp"

namespace touchmap {

/// Hand-set thresholds of the precision-biased impact detector. Every gate
/// is relative (ratios or scale-free features), so the detector does not
/// depend on recording level.
struct DetectorConfig {
    int smooth_len = 5;                    // frames, odd
    double energy_prominence_ratio = 4.0;  // prominence / local median of smoothed energy
    double flatness_min = 0.3;
    double onset_ratio_min = 3.0;          // onset / median onset of the clip
    double refractory_ms = 100.0;
    double segment_ms = 200.0;
    double pre_roll_ms = 50.0;
    double median_window_s = 1.0;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

struct Peak {
    std::size_t index = 0;
    double prominence = 0.0;
};

struct DetectionEvent {
    std::size_t peak_frame = 0;
    double peak_time = 0.0;          // seconds, sub-frame refined
    double energy_prominence = 0.0;  // ratio to the local median
    double flatness_at_peak = 0.0;
    double onset_ratio = 0.0;
    long long segment_start = 0;     // samples; may be negative (left zero-padding)
    long long segment_end = 0;       // exclusive
};

/// Centered moving average; edges average over the samples available.
std::vector<double> smooth(const std::vector<double>& track, int len);

/// Strict local maxima with topographic prominence. A plateau reports its
/// leftmost sample.
std::vector<Peak> find_peaks(const std::vector<double>& track);

/// Energy-peak -> flatness -> onset gate cascade.
std::vector<DetectionEvent> detect_events(const Spectrogram& spec, const FeatureTracks& feats,
                                          const DetectorConfig& cfg = {});

/// STFT + features + detection with the pipeline's default analysis geometry.
std::vector<DetectionEvent> detect_clip(const AudioClip& clip, const DetectorConfig& cfg = {},
                                        const StftConfig& stft_cfg = {});

/// segment_ms of audio starting pre_roll_ms before the event peak,
/// zero-padded beyond the clip boundaries.
AudioClip extract_segment(const AudioClip& clip, const DetectionEvent& ev, const DetectorConfig& cfg = {});

/// Segment bounds in samples for a peak at `peak_time` seconds.
std::pair<long long, long long> segment_bounds(double peak_time, int sample_rate, const DetectorConfig& cfg);

/// One JSON-lines record:
/// {clip_id, peak_time_s, prominence, flatness, onset_ratio, segment_start_s, segment_end_s}
std::string event_to_json_line(const std::string& clip_id, const DetectionEvent& ev, int sample_rate);

struct EventRecord {
    std::string clip_id;
    double peak_time_s = 0.0;
    double prominence = 0.0;
    double flatness = 0.0;
    double onset_ratio = 0.0;
    double segment_start_s = 0.0;
    double segment_end_s = 0.0;
};

EventRecord parse_event_line(const std::string& line);

} // namespace touchmap
