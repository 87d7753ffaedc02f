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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "touchmap/audio.hpp"
#include "touchmap/manifold.hpp"

namespace touchmap {

/// An impact type: a Hann-windowed band-limited noise burst. `amplitude`
/// is the burst's RMS over its duration.
struct EventClass {
    std::string name;
    double click_len_ms = 80.0;
    double band_lo_hz = 200.0;
    double band_hi_hz = 7900.0;
    double amplitude = 0.1;
};

struct NoiseSpec {
    std::string kind = "pink";  // white | pink | none
    double level_db = -30.0;    // RMS, dB re full scale
};

/// Narrow-band distractor: a Hann-shaped sine burst.
struct ToneSpec {
    double freq_hz = 440.0;
    double level_db = -27.0;  // RMS over the burst
    double duration_ms = 150.0;
};

struct EmbeddingSpec {
    int d = 64;
    double cluster_sep = 10.0;
    double cluster_sigma = 0.5;
};

struct SynthSpec {
    int n_clips = 100;
    double clip_len_s = 5.0;
    int sample_rate = 16000;
    std::vector<EventClass> event_classes;
    int events_per_clip = 4;
    NoiseSpec noise;
    std::vector<ToneSpec> distractors;
    int distractors_per_clip = 2;
    double min_separation_s = 0.35;  // between any two scheduled event centres
    double edge_margin_s = 0.25;
    EmbeddingSpec embedding;
    std::uint64_t seed = 7;

    void validate() const;

    /// 100 clips x 5 s, three impact classes at 10 dB SNR over pink noise,
    /// two tone distractors per clip, 64-D embeddings.
    static SynthSpec standard();
};

struct ClipTruth {
    std::string clip_id;
    int class_index = 0;
    std::string class_name;
    std::vector<double> event_times;       // burst centres, seconds
    std::vector<double> distractor_times;  // tone centres, seconds
    std::size_t embedding_row = 0;
    int cluster_label = 0;
};

struct GroundTruth {
    std::vector<ClipTruth> clips;
};

struct SynthCorpus {
    std::vector<AudioClip> clips;
    GroundTruth truth;
};

std::string clip_id_for(std::size_t index);

/// Generates every clip of the corpus. Clip i depends only on (seed, i).
SynthCorpus synth_audio(const SynthSpec& spec, int jobs = 1);

/// A single clip and its truth record.
AudioClip synth_clip(const SynthSpec& spec, std::size_t index, ClipTruth& truth);

/// The burst for event `event_index` of clip `clip_index`, as placed by synth_clip.
std::vector<double> click_waveform(const SynthSpec& spec, const EventClass& cls, std::size_t clip_index,
                                   std::size_t event_index);

/// Sample index at which a burst of `length` samples centred at `t` starts.
long long burst_start(double t, std::size_t length, int sample_rate);

/// Mutually orthogonal cluster centres, pairwise exactly `sep` apart.
std::vector<std::vector<double>> cluster_centers(int k, int d, double sep, std::uint64_t seed);

/// One Gaussian row per clip around its class's cluster centre; ids = clip ids.
EmbeddingMatrix synth_embeddings(const SynthSpec& spec, const GroundTruth& truth);

struct LabeledEmbedding {
    EmbeddingMatrix emb;
    std::vector<int> labels;
};

/// n points in k isotropic Gaussian blobs (label = i mod k).
LabeledEmbedding gaussian_blobs(std::size_t n, int d, int k, double sep, double sigma, std::uint64_t seed);

struct ManifestRecord {
    std::string clip_id;
    std::string audio_path;
    std::size_t embedding_row = 0;
    std::optional<std::string> cls;  // absent in blind manifests
};

/// Joins truth with audio paths. Throws on ids without paths, unknown paths,
/// or embedding rows referenced more than once.
std::vector<ManifestRecord> make_manifest(const GroundTruth& truth,
                                          const std::map<std::string, std::string>& paths, bool blind = false);

std::string manifest_line(const ManifestRecord& r);
ManifestRecord parse_manifest_line(const std::string& line);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

void write_truth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth read_truth(const std::filesystem::path& path);

std::string spec_to_json(const SynthSpec& spec);
/// Keys missing from `text` take their values from SynthSpec::standard().
SynthSpec spec_from_json(const std::string& text);

/// Writes audio/, embeddings.csv, manifest.jsonl, truth.jsonl and spec.json under `out`.
void write_corpus(const std::filesystem::path& out, const SynthSpec& spec, const SynthCorpus& corpus,
                  bool blind = false);

} // namespace touchmap
