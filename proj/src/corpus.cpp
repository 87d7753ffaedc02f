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

#include "touchmap/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "touchmap/dsp.hpp"
#include "touchmap/error.hpp"
#include "touchmap/fft.hpp"
#include "touchmap/util.hpp"

namespace touchmap {

using detail::json;

namespace {

enum Stream : std::uint32_t { kNoise = 0, kClick = 1, kTone = 2, kSchedule = 3, kEmbedding = 4, kCenters = 5 };

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a, std::uint32_t stream, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), stream,
                      static_cast<std::uint32_t>(b)};
    return std::mt19937_64(seq);
}

double db_to_amp(double db) { return std::pow(10.0, db / 20.0); }

void scale_to_rms(std::vector<double>& x, double rms) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    const double cur = std::sqrt(acc / static_cast<double>(std::max<std::size_t>(1, x.size())));
    if (cur <= 0.0) return;
    for (double& v : x) v *= rms / cur;
}

// White noise shaped in the frequency domain: mask == band keeps [lo, hi],
// pink scales bin k by 1/sqrt(k).
std::vector<double> shaped_noise(std::size_t length, int sample_rate, std::mt19937_64& rng, bool pink, double lo_hz,
                                 double hi_hz) {
    const std::size_t p = next_power_of_two(std::max<std::size_t>(2 * length, 2));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::complex<double>> buf(p);
    for (auto& v : buf) v = {gauss(rng), 0.0};
    const FftPlan plan(p);
    plan.forward(buf);
    const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(p);
    for (std::size_t k = 0; k < p; ++k) {
        const std::size_t kk = k <= p / 2 ? k : p - k;
        const double f = kk * bin_hz;
        double g = 1.0;
        if (kk == 0) g = 0.0;
        else if (pink) g = 1.0 / std::sqrt(static_cast<double>(kk));
        if (f < lo_hz || f > hi_hz) g = 0.0;
        buf[k] *= g;
    }
    plan.inverse(buf);
    std::vector<double> out(length);
    for (std::size_t i = 0; i < length; ++i) out[i] = buf[i].real();
    return out;
}

std::vector<double> symmetric_hann(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    return w;
}

void add_at(std::vector<double>& dst, const std::vector<double>& src, long long start) {
    const auto n = static_cast<long long>(dst.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        const long long idx = start + static_cast<long long>(i);
        if (idx >= 0 && idx < n) dst[static_cast<std::size_t>(idx)] += src[i];
    }
}

} // namespace

void SynthSpec::validate() const {
    if (n_clips < 1) throw ConfigError("synth: n_clips must be >= 1");
    if (!(clip_len_s > 0.0)) throw ConfigError("synth: clip_len_s must be > 0");
    if (sample_rate <= 0) throw ConfigError("synth: sample_rate must be > 0");
    if (event_classes.empty()) throw ConfigError("synth: at least one event class is required");
    for (const auto& c : event_classes) {
        if (!(c.amplitude > 0.0 && c.amplitude <= 1.0))
            throw ConfigError("synth: class '" + c.name + "' amplitude must be in (0, 1]");
        if (!(c.click_len_ms > 0.0)) throw ConfigError("synth: class '" + c.name + "' click_len_ms must be > 0");
        if (!(c.band_lo_hz >= 0.0 && c.band_hi_hz > c.band_lo_hz && c.band_hi_hz <= sample_rate / 2.0))
            throw ConfigError("synth: class '" + c.name + "' band must satisfy 0 <= lo < hi <= nyquist");
    }
    if (events_per_clip < 0 || distractors_per_clip < 0) throw ConfigError("synth: event counts must be >= 0");
    if (distractors_per_clip > 0 && distractors.empty())
        throw ConfigError("synth: distractors_per_clip > 0 but no distractor tones defined");
    if (!(min_separation_s > 0.3)) throw ConfigError("synth: min_separation_s must exceed 0.3 s");
    if (noise.kind != "white" && noise.kind != "pink" && noise.kind != "none")
        throw ConfigError("synth: noise.kind must be white, pink or none");
    if (embedding.d < static_cast<int>(event_classes.size()))
        throw ConfigError("synth: embedding.d must be >= number of event classes");
    if (!(embedding.cluster_sigma >= 0.0) || !(embedding.cluster_sep > 0.0))
        throw ConfigError("synth: embedding.cluster_sep must be > 0 and cluster_sigma >= 0");
}

SynthSpec SynthSpec::standard() {
    SynthSpec s;
    // Burst RMS 0.1 (-20 dBFS) over -30 dBFS noise: 10 dB SNR. Bursts of 80 ms
    // sit inside the 40-100 ms span typical of touch sounds.
    s.event_classes = {
        {"knock", 80.0, 200.0, 6000.0, 0.1},
        {"tap", 80.0, 1000.0, 7900.0, 0.1},
        {"clink", 80.0, 200.0, 7900.0, 0.1},
    };
    s.noise = {"pink", -30.0};
    s.distractors = {{440.0, -27.0, 150.0}, {1000.0, -27.0, 150.0}, {2500.0, -27.0, 150.0}};
    return s;
}

std::string clip_id_for(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%04zu", index);
    return buf;
}

long long burst_start(double t, std::size_t length, int sample_rate) {
    return std::llround(t * sample_rate) - static_cast<long long>(length / 2);
}

std::vector<double> click_waveform(const SynthSpec& spec, const EventClass& cls, std::size_t clip_index,
                                   std::size_t event_index) {
    auto rng = make_rng(spec.seed, clip_index, kClick, event_index);
    const auto len = static_cast<std::size_t>(std::max(1LL, std::llround(cls.click_len_ms * spec.sample_rate / 1000.0)));
    auto burst = shaped_noise(len, spec.sample_rate, rng, false, cls.band_lo_hz, cls.band_hi_hz);
    scale_to_rms(burst, 1.0);
    const auto w = symmetric_hann(len);
    for (std::size_t i = 0; i < len; ++i) burst[i] *= w[i];
    scale_to_rms(burst, cls.amplitude);
    return burst;
}

AudioClip synth_clip(const SynthSpec& spec, std::size_t index, ClipTruth& truth) {
    const auto n = static_cast<std::size_t>(std::llround(spec.clip_len_s * spec.sample_rate));
    AudioClip clip;
    clip.sample_rate = spec.sample_rate;
    clip.samples.assign(n, 0.0);

    truth = {};
    truth.clip_id = clip_id_for(index);
    truth.class_index = static_cast<int>(index % spec.event_classes.size());
    truth.class_name = spec.event_classes[static_cast<std::size_t>(truth.class_index)].name;
    truth.embedding_row = index;
    truth.cluster_label = truth.class_index;

    // Schedule: sorted uniforms in the slack plus i * separation guarantees spacing.
    const auto count = static_cast<std::size_t>(spec.events_per_clip + spec.distractors_per_clip);
    if (count > 0) {
        const double span = spec.clip_len_s - 2.0 * spec.edge_margin_s;
        const double slack = span - static_cast<double>(count - 1) * spec.min_separation_s;
        if (slack < 0.0)
            throw Error("synth: event collision: " + std::to_string(count) + " events need " +
                        std::to_string((count - 1) * spec.min_separation_s) + " s but only " +
                        std::to_string(span) + " s are available");
        auto rng = make_rng(spec.seed, index, kSchedule);
        std::uniform_real_distribution<double> uni(0.0, slack);
        std::vector<double> u(count);
        for (auto& v : u) v = uni(rng);
        std::sort(u.begin(), u.end());
        std::vector<double> times(count);
        for (std::size_t i = 0; i < count; ++i)
            times[i] = spec.edge_margin_s + u[i] + static_cast<double>(i) * spec.min_separation_s;
        std::vector<std::size_t> slots(count);
        for (std::size_t i = 0; i < count; ++i) slots[i] = i;
        std::shuffle(slots.begin(), slots.end(), rng);
        for (std::size_t i = 0; i < count; ++i) {
            if (i < static_cast<std::size_t>(spec.events_per_clip)) truth.event_times.push_back(times[slots[i]]);
            else truth.distractor_times.push_back(times[slots[i]]);
        }
        std::sort(truth.event_times.begin(), truth.event_times.end());
        std::sort(truth.distractor_times.begin(), truth.distractor_times.end());
    }

    if (spec.noise.kind != "none") {
        auto rng = make_rng(spec.seed, index, kNoise);
        auto bed = shaped_noise(n, spec.sample_rate, rng, spec.noise.kind == "pink", 0.0, spec.sample_rate);
        scale_to_rms(bed, db_to_amp(spec.noise.level_db));
        for (std::size_t i = 0; i < n; ++i) clip.samples[i] += bed[i];
    }

    const auto& cls = spec.event_classes[static_cast<std::size_t>(truth.class_index)];
    for (std::size_t e = 0; e < truth.event_times.size(); ++e) {
        const auto burst = click_waveform(spec, cls, index, e);
        add_at(clip.samples, burst, burst_start(truth.event_times[e], burst.size(), spec.sample_rate));
    }

    for (std::size_t k = 0; k < truth.distractor_times.size(); ++k) {
        auto rng = make_rng(spec.seed, index, kTone, k);
        std::uniform_int_distribution<std::size_t> pick(0, spec.distractors.size() - 1);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        const auto& tone = spec.distractors[pick(rng)];
        const double phi = phase(rng);
        const auto len = static_cast<std::size_t>(std::llround(tone.duration_ms * spec.sample_rate / 1000.0));
        std::vector<double> burst(len);
        const auto w = symmetric_hann(len);
        for (std::size_t i = 0; i < len; ++i)
            burst[i] = w[i] * std::sin(2.0 * std::numbers::pi * tone.freq_hz * static_cast<double>(i) /
                                           spec.sample_rate + phi);
        scale_to_rms(burst, db_to_amp(tone.level_db));
        add_at(clip.samples, burst, burst_start(truth.distractor_times[k], len, spec.sample_rate));
    }
    return clip;
}

SynthCorpus synth_audio(const SynthSpec& spec, int jobs) {
    spec.validate();
    SynthCorpus corpus;
    const auto n = static_cast<std::size_t>(spec.n_clips);
    corpus.clips.resize(n);
    corpus.truth.clips.resize(n);
    parallel_for(n, jobs, [&](std::size_t i) { corpus.clips[i] = synth_clip(spec, i, corpus.truth.clips[i]); });
    return corpus;
}

std::vector<std::vector<double>> cluster_centers(int k, int d, double sep, std::uint64_t seed) {
    if (k > d) throw ConfigError("cluster_centers: need d >= k for orthogonal centres");
    auto rng = make_rng(seed, 0, kCenters);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> basis;
    while (static_cast<int>(basis.size()) < k) {
        std::vector<double> v(static_cast<std::size_t>(d));
        for (auto& x : v) x = gauss(rng);
        for (const auto& b : basis) {
            double dot = 0.0;
            for (int i = 0; i < d; ++i) dot += v[i] * b[i];
            for (int i = 0; i < d; ++i) v[i] -= dot * b[i];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;
        for (auto& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    // Orthonormal vectors scaled by sep/sqrt(2) are pairwise sep apart.
    const double s = sep / std::sqrt(2.0);
    for (auto& b : basis)
        for (auto& x : b) x *= s;
    return basis;
}

EmbeddingMatrix synth_embeddings(const SynthSpec& spec, const GroundTruth& truth) {
    const int k = static_cast<int>(spec.event_classes.size());
    const auto centers = cluster_centers(k, spec.embedding.d, spec.embedding.cluster_sep, spec.seed);
    EmbeddingMatrix emb;
    emb.n = truth.clips.size();
    emb.d = static_cast<std::size_t>(spec.embedding.d);
    emb.data.resize(emb.n * emb.d);
    emb.ids.resize(emb.n);
    for (const auto& c : truth.clips) {
        if (c.embedding_row >= emb.n) throw Error("synth_embeddings: embedding row out of range");
        auto rng = make_rng(spec.seed, c.embedding_row, kEmbedding);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const auto& center = centers.at(static_cast<std::size_t>(c.cluster_label));
        auto row = emb.row(c.embedding_row);
        for (std::size_t j = 0; j < emb.d; ++j) row[j] = center[j] + spec.embedding.cluster_sigma * gauss(rng);
        emb.ids[c.embedding_row] = c.clip_id;
    }
    return emb;
}

LabeledEmbedding gaussian_blobs(std::size_t n, int d, int k, double sep, double sigma, std::uint64_t seed) {
    const auto centers = cluster_centers(k, d, sep, seed);
    LabeledEmbedding out;
    out.emb.n = n;
    out.emb.d = static_cast<std::size_t>(d);
    out.emb.data.resize(n * out.emb.d);
    out.emb.ids.resize(n);
    out.labels.resize(n);
    auto rng = make_rng(seed, 0, kEmbedding, 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % static_cast<std::size_t>(k));
        out.labels[i] = label;
        out.emb.ids[i] = "pt_" + std::to_string(i);
        auto row = out.emb.row(i);
        for (std::size_t j = 0; j < out.emb.d; ++j)
            row[j] = centers[static_cast<std::size_t>(label)][j] + sigma * gauss(rng);
    }
    return out;
}

// Manifest ---------------------------------------------------------------

std::vector<ManifestRecord> make_manifest(const GroundTruth& truth, const std::map<std::string, std::string>& paths,
                                          bool blind) {
    std::vector<ManifestRecord> out;
    std::set<std::size_t> rows;
    std::set<std::string> ids;
    for (const auto& c : truth.clips) {
        const auto it = paths.find(c.clip_id);
        if (it == paths.end()) throw Error("manifest: no audio path for clip '" + c.clip_id + "'");
        if (!ids.insert(c.clip_id).second) throw Error("manifest: duplicate clip id '" + c.clip_id + "'");
        if (!rows.insert(c.embedding_row).second)
            throw Error("manifest: embedding row " + std::to_string(c.embedding_row) + " referenced twice");
        ManifestRecord r{c.clip_id, it->second, c.embedding_row, std::nullopt};
        if (!blind) r.cls = c.class_name;
        out.push_back(std::move(r));
    }
    for (const auto& [id, _] : paths)
        if (!ids.count(id)) throw Error("manifest: dangling audio path for unknown clip '" + id + "'");
    return out;
}

std::string manifest_line(const ManifestRecord& r) {
    nlohmann::ordered_json j;
    j["clip_id"] = r.clip_id;
    j["audio_path"] = r.audio_path;
    j["embedding_row"] = r.embedding_row;
    if (r.cls) j["class"] = *r.cls;
    return j.dump();
}

ManifestRecord parse_manifest_line(const std::string& line) {
    try {
        const auto j = json::parse(line);
        detail::check_keys(j, {"clip_id", "audio_path", "embedding_row", "class"}, "manifest record");
        ManifestRecord r;
        r.clip_id = j.at("clip_id").get<std::string>();
        r.audio_path = j.at("audio_path").get<std::string>();
        r.embedding_row = j.at("embedding_row").get<std::size_t>();
        if (j.contains("class")) r.cls = j.at("class").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad manifest record: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(e.what());
    }
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    for (const auto& r : records) out << manifest_line(r) << '\n';
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open manifest " + path.string());
    std::vector<ManifestRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_manifest_line(line));
    }
    return out;
}

void write_truth(const std::filesystem::path& path, const GroundTruth& truth) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    for (const auto& c : truth.clips) {
        nlohmann::ordered_json j;
        j["clip_id"] = c.clip_id;
        j["class"] = c.class_name;
        j["class_index"] = c.class_index;
        j["event_times"] = c.event_times;
        j["distractor_times"] = c.distractor_times;
        j["embedding_row"] = c.embedding_row;
        j["cluster_label"] = c.cluster_label;
        out << j.dump() << '\n';
    }
}

GroundTruth read_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open truth file " + path.string());
    GroundTruth t;
    std::string line;
    try {
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            const auto j = json::parse(line);
            ClipTruth c;
            c.clip_id = j.at("clip_id").get<std::string>();
            c.class_name = j.at("class").get<std::string>();
            c.class_index = j.at("class_index").get<int>();
            c.event_times = j.at("event_times").get<std::vector<double>>();
            c.distractor_times = j.at("distractor_times").get<std::vector<double>>();
            c.embedding_row = j.at("embedding_row").get<std::size_t>();
            c.cluster_label = j.at("cluster_label").get<int>();
            t.clips.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return t;
}

std::string spec_to_json(const SynthSpec& s) {
    nlohmann::ordered_json j;
    j["n_clips"] = s.n_clips;
    j["clip_len_s"] = s.clip_len_s;
    j["sample_rate"] = s.sample_rate;
    j["event_classes"] = nlohmann::ordered_json::array();
    for (const auto& c : s.event_classes)
        j["event_classes"].push_back({{"name", c.name},
                                      {"click_len_ms", c.click_len_ms},
                                      {"band", {c.band_lo_hz, c.band_hi_hz}},
                                      {"amplitude", c.amplitude}});
    j["events_per_clip"] = s.events_per_clip;
    j["noise"] = {{"kind", s.noise.kind}, {"level_db", s.noise.level_db}};
    j["distractors"] = nlohmann::ordered_json::array();
    for (const auto& t : s.distractors)
        j["distractors"].push_back({{"freq_hz", t.freq_hz}, {"level_db", t.level_db}, {"duration_ms", t.duration_ms}});
    j["distractors_per_clip"] = s.distractors_per_clip;
    j["min_separation_s"] = s.min_separation_s;
    j["edge_margin_s"] = s.edge_margin_s;
    j["embedding"] = {{"d", s.embedding.d},
                      {"cluster_sep", s.embedding.cluster_sep},
                      {"cluster_sigma", s.embedding.cluster_sigma}};
    j["seed"] = s.seed;
    return j.dump(2);
}

SynthSpec spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    const std::string w = "synth spec";
    detail::check_keys(j,
                       {"n_clips", "clip_len_s", "sample_rate", "event_classes", "events_per_clip", "noise",
                        "distractors", "distractors_per_clip", "min_separation_s", "edge_margin_s", "embedding", "seed"},
                       w);
    // Absent keys keep the standard corpus's values.
    SynthSpec s = SynthSpec::standard();
    detail::read_opt(j, "n_clips", s.n_clips, w);
    detail::read_opt(j, "clip_len_s", s.clip_len_s, w);
    detail::read_opt(j, "sample_rate", s.sample_rate, w);
    detail::read_opt(j, "events_per_clip", s.events_per_clip, w);
    detail::read_opt(j, "distractors_per_clip", s.distractors_per_clip, w);
    detail::read_opt(j, "min_separation_s", s.min_separation_s, w);
    detail::read_opt(j, "edge_margin_s", s.edge_margin_s, w);
    detail::read_opt(j, "seed", s.seed, w);
    if (j.contains("event_classes")) {
        s.event_classes.clear();
        for (const auto& c : j.at("event_classes")) {
            detail::check_keys(c, {"name", "click_len_ms", "band", "amplitude"}, w + ".event_classes");
            EventClass ec;
            detail::read_opt(c, "name", ec.name, w);
            detail::read_opt(c, "click_len_ms", ec.click_len_ms, w);
            detail::read_opt(c, "amplitude", ec.amplitude, w);
            if (c.contains("band")) {
                const auto band = c.at("band").get<std::vector<double>>();
                if (band.size() != 2) throw ConfigError(w + ".event_classes.band must be [lo, hi]");
                ec.band_lo_hz = band[0];
                ec.band_hi_hz = band[1];
            }
            s.event_classes.push_back(ec);
        }
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        detail::check_keys(n, {"kind", "level_db"}, w + ".noise");
        detail::read_opt(n, "kind", s.noise.kind, w);
        detail::read_opt(n, "level_db", s.noise.level_db, w);
    }
    if (j.contains("distractors")) {
        s.distractors.clear();
        for (const auto& t : j.at("distractors")) {
            detail::check_keys(t, {"freq_hz", "level_db", "duration_ms"}, w + ".distractors");
            ToneSpec ts;
            detail::read_opt(t, "freq_hz", ts.freq_hz, w);
            detail::read_opt(t, "level_db", ts.level_db, w);
            detail::read_opt(t, "duration_ms", ts.duration_ms, w);
            s.distractors.push_back(ts);
        }
    }
    if (j.contains("embedding")) {
        const auto& e = j.at("embedding");
        detail::check_keys(e, {"d", "cluster_sep", "cluster_sigma"}, w + ".embedding");
        detail::read_opt(e, "d", s.embedding.d, w);
        detail::read_opt(e, "cluster_sep", s.embedding.cluster_sep, w);
        detail::read_opt(e, "cluster_sigma", s.embedding.cluster_sigma, w);
    }
    s.validate();
    return s;
}

void write_corpus(const std::filesystem::path& out, const SynthSpec& spec, const SynthCorpus& corpus, bool blind) {
    namespace fs = std::filesystem;
    fs::create_directories(out / "audio");
    std::map<std::string, std::string> paths;
    for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
        const auto& id = corpus.truth.clips[i].clip_id;
        const std::string rel = "audio/" + id + ".wav";
        write_wav(out / rel, corpus.clips[i]);
        paths[id] = rel;
    }
    write_embedding_csv(out / "embeddings.csv", synth_embeddings(spec, corpus.truth));
    write_manifest(out / "manifest.jsonl", make_manifest(corpus.truth, paths, blind));
    write_truth(out / "truth.jsonl", corpus.truth);
    std::ofstream(out / "spec.json") << spec_to_json(spec) << '\n';
}

} // namespace touchmap
