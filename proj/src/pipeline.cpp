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

#include "touchmap/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "touchmap/audio.hpp"
#include "touchmap/error.hpp"
#include "touchmap/util.hpp"

namespace fs = std::filesystem;

namespace touchmap {

using detail::check_keys;
using detail::json;
using detail::read_opt;

// Config -------------------------------------------------------------------

void PipelineConfig::finalize() {
    if (dsp.window < 1 || dsp.hop < 1) throw ConfigError("dsp: window and hop must be >= 1");
    if (dsp.fft_size < dsp.window)
        throw ConfigError("dsp.fft_size (" + std::to_string(dsp.fft_size) + ") must be >= dsp.window (" +
                          std::to_string(dsp.window) + ")");
    if (!(log_floor > 0.0)) throw ConfigError("dsp.log_floor must be > 0");
    detector.validate();
    if (!(holdout_frac >= 0.0 && holdout_frac < 1.0)) throw ConfigError("regressor.holdout_frac must be in [0, 1)");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");

    manifold.seed = seed;
    manifold.jobs = jobs;
    manifold.deterministic = deterministic;
    manifold.validate();

    const auto seg_samples =
        static_cast<std::size_t>(std::llround(detector.segment_ms * kPipelineSampleRate / 1000.0));
    regressor.seed = seed + 1;
    regressor.input_bins = dsp.fft_size / 2 + 1;
    regressor.input_frames = static_cast<int>(stft_frame_count(seg_samples, dsp));
    try {
        regressor.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()) + " (segments of " + format_double(detector.segment_ms) +
                          " ms give " + std::to_string(regressor.input_bins) + " bins x " +
                          std::to_string(regressor.input_frames) + " frames)");
    }
}

PipelineConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    check_keys(j, {"seed", "jobs", "deterministic", "dsp", "detector", "manifold", "regressor", "paths"}, "config");
    PipelineConfig c;
    read_opt(j, "seed", c.seed, "config");
    read_opt(j, "jobs", c.jobs, "config");
    read_opt(j, "deterministic", c.deterministic, "config");
    if (j.contains("dsp")) {
        const auto& s = j["dsp"];
        check_keys(s, {"window", "hop", "fft_size", "pad_end", "log_floor"}, "dsp");
        read_opt(s, "window", c.dsp.window, "dsp");
        read_opt(s, "hop", c.dsp.hop, "dsp");
        read_opt(s, "fft_size", c.dsp.fft_size, "dsp");
        read_opt(s, "pad_end", c.dsp.pad_end, "dsp");
        read_opt(s, "log_floor", c.log_floor, "dsp");
    }
    if (j.contains("detector")) {
        const auto& s = j["detector"];
        check_keys(s,
                   {"smooth_len", "energy_prominence_ratio", "flatness_min", "onset_ratio_min", "refractory_ms",
                    "segment_ms", "pre_roll_ms", "median_window_s"},
                   "detector");
        auto& d = c.detector;
        read_opt(s, "smooth_len", d.smooth_len, "detector");
        read_opt(s, "energy_prominence_ratio", d.energy_prominence_ratio, "detector");
        read_opt(s, "flatness_min", d.flatness_min, "detector");
        read_opt(s, "onset_ratio_min", d.onset_ratio_min, "detector");
        read_opt(s, "refractory_ms", d.refractory_ms, "detector");
        read_opt(s, "segment_ms", d.segment_ms, "detector");
        read_opt(s, "pre_roll_ms", d.pre_roll_ms, "detector");
        read_opt(s, "median_window_s", d.median_window_s, "detector");
    }
    if (j.contains("manifold")) {
        const auto& s = j["manifold"];
        check_keys(s,
                   {"n_neighbors", "min_dist", "spread", "n_epochs", "negative_samples", "learning_rate",
                    "gradient_clip", "spectral_init"},
                   "manifold");
        auto& m = c.manifold;
        read_opt(s, "n_neighbors", m.n_neighbors, "manifold");
        read_opt(s, "min_dist", m.min_dist, "manifold");
        read_opt(s, "spread", m.spread, "manifold");
        read_opt(s, "n_epochs", m.n_epochs, "manifold");
        read_opt(s, "negative_samples", m.negative_samples, "manifold");
        read_opt(s, "learning_rate", m.learning_rate, "manifold");
        read_opt(s, "gradient_clip", m.gradient_clip, "manifold");
        read_opt(s, "spectral_init", m.spectral_init, "manifold");
    }
    if (j.contains("regressor")) {
        const auto& s = j["regressor"];
        check_keys(s,
                   {"conv_channels", "lr", "momentum", "batch", "epochs", "min_rel_improvement", "patience",
                    "target_metric", "max_steps", "holdout_frac"},
                   "regressor");
        auto& r = c.regressor;
        read_opt(s, "conv_channels", r.conv_channels, "regressor");
        read_opt(s, "lr", r.lr, "regressor");
        read_opt(s, "momentum", r.momentum, "regressor");
        read_opt(s, "batch", r.batch, "regressor");
        read_opt(s, "epochs", r.epochs, "regressor");
        read_opt(s, "min_rel_improvement", r.min_rel_improvement, "regressor");
        read_opt(s, "patience", r.patience, "regressor");
        read_opt(s, "target_metric", r.target_metric, "regressor");
        read_opt(s, "max_steps", r.max_steps, "regressor");
        read_opt(s, "holdout_frac", c.holdout_frac, "regressor");
    }
    if (j.contains("paths")) {
        const auto& s = j["paths"];
        check_keys(s, {"audio_dir", "embeddings", "manifest", "segments_dir", "coords", "model", "out"}, "paths");
        auto& p = c.paths;
        read_opt(s, "audio_dir", p.audio_dir, "paths");
        read_opt(s, "embeddings", p.embeddings, "paths");
        read_opt(s, "manifest", p.manifest, "paths");
        read_opt(s, "segments_dir", p.segments_dir, "paths");
        read_opt(s, "coords", p.coords, "paths");
        read_opt(s, "model", p.model, "paths");
        read_opt(s, "out", p.out, "paths");
    }
    c.finalize();
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return config_from_json(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string config_to_json(const PipelineConfig& c) {
    const auto& d = c.detector;
    const auto& m = c.manifold;
    const auto& r = c.regressor;
    const auto& p = c.paths;
    json j{{"seed", c.seed},
           {"jobs", c.jobs},
           {"deterministic", c.deterministic},
           {"dsp",
            {{"window", c.dsp.window},
             {"hop", c.dsp.hop},
             {"fft_size", c.dsp.fft_size},
             {"pad_end", c.dsp.pad_end},
             {"log_floor", c.log_floor}}},
           {"detector",
            {{"smooth_len", d.smooth_len},
             {"energy_prominence_ratio", d.energy_prominence_ratio},
             {"flatness_min", d.flatness_min},
             {"onset_ratio_min", d.onset_ratio_min},
             {"refractory_ms", d.refractory_ms},
             {"segment_ms", d.segment_ms},
             {"pre_roll_ms", d.pre_roll_ms},
             {"median_window_s", d.median_window_s}}},
           {"manifold",
            {{"n_neighbors", m.n_neighbors},
             {"min_dist", m.min_dist},
             {"spread", m.spread},
             {"n_epochs", m.n_epochs},
             {"negative_samples", m.negative_samples},
             {"learning_rate", m.learning_rate},
             {"gradient_clip", m.gradient_clip},
             {"spectral_init", m.spectral_init}}},
           {"regressor",
            {{"conv_channels", r.conv_channels},
             {"lr", r.lr},
             {"momentum", r.momentum},
             {"batch", r.batch},
             {"epochs", r.epochs},
             {"min_rel_improvement", r.min_rel_improvement},
             {"patience", r.patience},
             {"target_metric", r.target_metric},
             {"max_steps", r.max_steps},
             {"holdout_frac", c.holdout_frac}}},
           {"paths",
            {{"audio_dir", p.audio_dir},
             {"embeddings", p.embeddings},
             {"manifest", p.manifest},
             {"segments_dir", p.segments_dir},
             {"coords", p.coords},
             {"model", p.model},
             {"out", p.out}}}};
    return j.dump(2) + "\n";
}

// Helpers --------------------------------------------------------------------

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

void check_csv_field(const std::string& s, const char* what) {
    if (s.find_first_of(",\"\n\r") != std::string::npos)
        throw FormatError(std::string(what) + " '" + s + "' cannot be written to CSV");
}

} // namespace

std::vector<fs::path> list_wavs(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (ext == ".wav") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string segment_name(const std::string& clip_id, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03zu", index);
    return clip_id + "__ev" + buf + ".wav";
}

std::optional<std::string> clip_id_from_segment(const std::string& filename) {
    if (filename.size() < 4 || filename.substr(filename.size() - 4) != ".wav") return std::nullopt;
    const auto stem = filename.substr(0, filename.size() - 4);
    const auto pos = stem.rfind("__ev");
    if (pos == std::string::npos || pos == 0) return std::nullopt;
    const auto digits = stem.substr(pos + 4);
    if (digits.size() < 3 || !std::all_of(digits.begin(), digits.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
        return std::nullopt;
    return stem.substr(0, pos);
}

// features -------------------------------------------------------------------

FeaturesReport run_features(const fs::path& input, const PipelineConfig& cfg, const fs::path& out_dir) {
    std::vector<fs::path> files;
    if (fs::is_directory(input)) files = list_wavs(input);
    else files.push_back(input);
    ensure_dir(out_dir);
    FeaturesReport rep;
    std::vector<std::optional<std::string>> errors(files.size());
    std::vector<std::size_t> frames(files.size(), 0);
    parallel_for(files.size(), cfg.effective_jobs(), [&](std::size_t i) {
        try {
            const auto clip = read_wav(files[i]);
            const auto spec = stft(clip, cfg.dsp);
            const auto f = compute_features(clip, spec);
            auto out = open_out(out_dir / (files[i].stem().string() + ".features.csv"));
            out << "frame,time_s,energy,flatness,onset,centroid_hz,zcr\n";
            for (std::size_t n = 0; n < f.size(); ++n) {
                out << n << ',' << format_double(spec.frame_time(static_cast<double>(n))) << ','
                    << format_double(f.energy[n]) << ',' << format_double(f.flatness[n]) << ','
                    << format_double(f.onset[n]) << ',' << format_double(f.centroid[n]) << ','
                    << format_double(f.zcr[n]) << '\n';
            }
            frames[i] = f.size();
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (errors[i]) rep.failures.push_back({files[i].string(), *errors[i]});
        else {
            ++rep.files;
            rep.frames += frames[i];
        }
    }
    return rep;
}

// detect ---------------------------------------------------------------------

DetectReport run_detect(const fs::path& audio_dir, const PipelineConfig& cfg, const fs::path& out_dir) {
    const auto files = list_wavs(audio_dir);
    DetectReport rep;
    if (files.empty()) rep.warnings.push_back("no WAV files in " + audio_dir.string());

    const fs::path seg_dir = out_dir / "segments";
    ensure_dir(seg_dir);
    // Stale segments from an earlier run would leak into training.
    for (const auto& entry : fs::directory_iterator(seg_dir))
        if (entry.is_regular_file() && clip_id_from_segment(entry.path().filename().string()))
            fs::remove(entry.path());

    struct Result {
        std::vector<std::string> lines;
        std::optional<std::string> error;
        double seconds = 0.0;
    };
    std::vector<Result> results(files.size());
    parallel_for(files.size(), cfg.effective_jobs(), [&](std::size_t i) {
        auto& r = results[i];
        try {
            const auto clip = read_wav(files[i]);
            const auto clip_id = files[i].stem().string();
            const auto events = detect_clip(clip, cfg.detector, cfg.dsp);
            for (std::size_t e = 0; e < events.size(); ++e) {
                write_wav(seg_dir / segment_name(clip_id, e), extract_segment(clip, events[e], cfg.detector));
                r.lines.push_back(event_to_json_line(clip_id, events[e], clip.sample_rate));
            }
            r.seconds = clip.duration_s();
        } catch (const std::exception& e) {
            r.error = e.what();
        }
    });

    auto out = open_out(out_dir / "events.jsonl");
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto& r = results[i];
        if (r.error) {
            rep.failures.push_back({files[i].string(), *r.error});
            continue;
        }
        ++rep.clips;
        rep.events += r.lines.size();
        rep.audio_seconds += r.seconds;
        for (const auto& l : r.lines) out << l << '\n';
    }
    return rep;
}

// reduce ---------------------------------------------------------------------

std::vector<std::string> labels_from_manifest(const std::vector<ManifestRecord>& manifest, std::size_t n_rows) {
    std::vector<std::string> labels(n_rows);
    for (const auto& r : manifest) {
        if (r.embedding_row >= n_rows)
            throw Error("manifest: clip '" + r.clip_id + "' references embedding_row " +
                        std::to_string(r.embedding_row) + " but there are only " + std::to_string(n_rows) + " rows");
        if (r.cls) labels[r.embedding_row] = *r.cls;
    }
    return labels;
}

ReduceReport run_reduce(const fs::path& embeddings, const PipelineConfig& cfg, const fs::path& out_dir,
                        const std::optional<fs::path>& manifest) {
    const auto emb = read_embedding(embeddings);
    std::vector<std::string> labels;
    if (manifest) labels = labels_from_manifest(read_manifest(*manifest), emb.n);
    const auto coords = embed(emb, cfg.manifold);
    ensure_dir(out_dir);
    write_coords_csv(out_dir / "coords.csv", coords);
    auto svg = open_out(out_dir / "coords.svg");
    svg << render_svg(coords, labels, {}, std::nullopt, "manifold (" + std::to_string(emb.n) + " points)");
    return {emb.n, emb.d};
}

// train / eval ---------------------------------------------------------------

JoinedData join_segments(const fs::path& segments_dir, const ManifoldCoords& coords,
                         const std::vector<ManifestRecord>& manifest, const PipelineConfig& cfg) {
    std::map<std::string, std::size_t> row_of;
    for (const auto& r : manifest) row_of[r.clip_id] = r.embedding_row;
    const auto files = list_wavs(segments_dir);

    struct Item {
        std::optional<TrainingPair> pair;
        std::string error;
    };
    std::vector<Item> items(files.size());
    const auto expected_samples =
        static_cast<std::size_t>(std::llround(cfg.detector.segment_ms * kPipelineSampleRate / 1000.0));
    parallel_for(files.size(), cfg.effective_jobs(), [&](std::size_t i) {
        const auto name = files[i].filename().string();
        auto& item = items[i];
        const auto clip_id = clip_id_from_segment(name);
        if (!clip_id) {
            item.error = name + ": not a segment file name (<clip_id>__evNNN.wav)";
            return;
        }
        const auto it = row_of.find(*clip_id);
        if (it == row_of.end()) {
            item.error = name + ": clip '" + *clip_id + "' is not in the manifest";
            return;
        }
        if (it->second >= coords.size()) {
            item.error = name + ": clip '" + *clip_id + "' maps to embedding_row " + std::to_string(it->second) +
                         " but the coordinates have " + std::to_string(coords.size()) + " rows";
            return;
        }
        try {
            const auto clip = read_wav(files[i]);
            if (clip.size() != expected_samples) {
                item.error = name + ": " + std::to_string(clip.size()) + " samples, expected " +
                             std::to_string(expected_samples);
                return;
            }
            TrainingPair p;
            p.features = segment_features(clip, cfg.dsp, cfg.log_floor);
            p.target = {coords.x(it->second), coords.y(it->second)};
            p.clip_id = *clip_id;
            item.pair = std::move(p);
        } catch (const std::exception& e) {
            item.error = name + ": " + e.what();
        }
    });

    JoinedData out;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (items[i].pair) {
            out.pairs.push_back(std::move(*items[i].pair));
            out.segment_files.push_back(files[i].filename().string());
        } else {
            out.join_errors.push_back(items[i].error);
        }
    }
    return out;
}

std::vector<std::string> holdout_clips(std::vector<std::string> clip_ids, double frac, std::uint64_t seed) {
    std::sort(clip_ids.begin(), clip_ids.end());
    clip_ids.erase(std::unique(clip_ids.begin(), clip_ids.end()), clip_ids.end());
    std::mt19937_64 rng(seed);
    std::shuffle(clip_ids.begin(), clip_ids.end(), rng);
    const auto k = static_cast<std::size_t>(std::llround(frac * static_cast<double>(clip_ids.size())));
    clip_ids.resize(std::min(k, clip_ids.size()));
    std::sort(clip_ids.begin(), clip_ids.end());
    return clip_ids;
}

ClusterCenters class_centers(const ManifoldCoords& coords, const std::vector<ManifestRecord>& manifest) {
    std::map<std::string, std::array<double, 3>> acc;
    for (const auto& r : manifest) {
        if (!r.cls || r.embedding_row >= coords.size()) continue;
        auto& a = acc[*r.cls];
        a[0] += coords.x(r.embedding_row);
        a[1] += coords.y(r.embedding_row);
        a[2] += 1.0;
    }
    ClusterCenters c;
    for (const auto& [name, a] : acc) {
        c.names.push_back(name);
        c.centers.push_back({a[0] / a[2], a[1] / a[2]});
    }
    return c;
}

double coordinate_span(const ManifoldCoords& coords) {
    if (coords.size() == 0) return 0.0;
    double x0 = coords.x(0), x1 = x0, y0 = coords.y(0), y1 = y0;
    for (std::size_t i = 1; i < coords.size(); ++i) {
        x0 = std::min(x0, coords.x(i));
        x1 = std::max(x1, coords.x(i));
        y0 = std::min(y0, coords.y(i));
        y1 = std::max(y1, coords.y(i));
    }
    return std::max(x1 - x0, y1 - y0);
}

std::optional<double> TrainEvalReport::holdout_error_fraction() const {
    if (!holdout || coordinate_span <= 0.0) return std::nullopt;
    return holdout->mean_error / coordinate_span;
}

namespace {

json split_json(const SplitMetrics& m) {
    json j{{"pairs", m.pairs}, {"clips", m.clips}, {"mean_error", m.mean_error}};
    j["nearest_cluster_accuracy"] = m.nearest_cluster_accuracy ? json(*m.nearest_cluster_accuracy) : json(nullptr);
    return j;
}

SplitMetrics split_metrics(const std::vector<Prediction>& preds, const std::string& split,
                           const std::map<std::string, std::string>& class_of, const ClusterCenters& centers) {
    SplitMetrics m;
    std::set<std::string> clips;
    std::size_t hits = 0, labelled = 0;
    double total = 0.0;
    for (const auto& p : preds) {
        if (p.split != split) continue;
        ++m.pairs;
        clips.insert(p.clip_id);
        total += p.error;
        const auto it = class_of.find(p.clip_id);
        if (it == class_of.end() || centers.names.empty()) continue;
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centers.centers.size(); ++c) {
            const double dx = p.predicted[0] - centers.centers[c][0], dy = p.predicted[1] - centers.centers[c][1];
            const double d = dx * dx + dy * dy;
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        ++labelled;
        if (centers.names[best] == it->second) ++hits;
    }
    m.clips = clips.size();
    m.mean_error = m.pairs ? total / static_cast<double>(m.pairs) : 0.0;
    if (labelled) m.nearest_cluster_accuracy = static_cast<double>(hits) / static_cast<double>(labelled);
    return m;
}

std::vector<Prediction> predict_all(const RegressorModel& model, const JoinedData& data,
                                    const std::set<std::string>& held, const std::string& held_name,
                                    const std::string& rest_name, int jobs) {
    const auto ev = evaluate(model, data.pairs, jobs);
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < data.pairs.size(); ++i) {
        const auto& p = data.pairs[i];
        preds.push_back({data.segment_files[i], p.clip_id, held.count(p.clip_id) ? held_name : rest_name, p.target,
                         ev.predictions[i], ev.per_item[i]});
    }
    return preds;
}

// Fills metrics and writes the report artifacts shared by train and eval.
void finish_report(TrainEvalReport& rep, const std::vector<Prediction>& preds, const ManifoldCoords& coords,
                   const std::vector<ManifestRecord>& manifest, bool has_holdout, const fs::path& out_dir) {
    std::map<std::string, std::string> class_of;
    for (const auto& r : manifest)
        if (r.cls) class_of[r.clip_id] = *r.cls;
    const auto centers = class_centers(coords, manifest);
    rep.coordinate_span = coordinate_span(coords);
    rep.train = split_metrics(preds, "train", class_of, centers);
    if (has_holdout) rep.holdout = split_metrics(preds, "holdout", class_of, centers);
    if (centers.names.empty())
        rep.notes.push_back("manifest has no class labels; nearest-cluster accuracy not computed");

    write_predictions_csv(out_dir / "predictions.csv", preds);
    std::vector<std::string> labels;
    try {
        labels = labels_from_manifest(manifest, coords.size());
    } catch (const Error&) {
        labels.clear();
    }
    const std::string patch_split = has_holdout ? "holdout" : "train";
    auto svg = open_out(out_dir / "errors.svg");
    std::vector<Prediction> shown;
    for (const auto& p : preds)
        if (p.split == patch_split) shown.push_back(p);
    svg << render_svg(coords, labels, shown, error_patch(preds, patch_split), patch_split + " predictions");
    auto out = open_out(out_dir / "report.json");
    out << rep.to_json();
}

} // namespace

std::string TrainEvalReport::to_json() const {
    json j;
    j["train"] = split_json(train);
    j["holdout"] = holdout ? split_json(*holdout) : json(nullptr);
    j["coordinate_span"] = coordinate_span;
    const auto frac = holdout_error_fraction();
    j["holdout_error_fraction"] = frac ? json(*frac) : json(nullptr);
    j["join_errors"] = join_errors;
    j["notes"] = notes;
    j["stop_reason"] = stop_reason;
    j["epochs"] = epochs;
    j["steps"] = steps;
    return j.dump(2) + "\n";
}

TrainEvalReport run_train_eval(const fs::path& segments_dir, const fs::path& coords_path,
                               const fs::path& manifest_path, const PipelineConfig& cfg, const fs::path& out_dir) {
    const auto manifest = read_manifest(manifest_path);
    const auto coords = read_coords_csv(coords_path);
    auto data = join_segments(segments_dir, coords, manifest, cfg);

    TrainEvalReport rep;
    rep.join_errors = data.join_errors;

    std::vector<std::string> ids;
    for (const auto& p : data.pairs) ids.push_back(p.clip_id);
    const auto held_list = holdout_clips(ids, cfg.holdout_frac, cfg.seed + 2);
    const std::set<std::string> held(held_list.begin(), held_list.end());

    std::vector<TrainingPair> train_pairs, hold_pairs;
    for (const auto& p : data.pairs) (held.count(p.clip_id) ? hold_pairs : train_pairs).push_back(p);
    if (train_pairs.size() < 10)
        throw Error("train: only " + std::to_string(train_pairs.size()) +
                    " training pairs after joining and splitting (need at least 10); " +
                    std::to_string(data.join_errors.size()) + " segments failed to join");

    ensure_dir(out_dir);
    const auto result = train(train_pairs, cfg.regressor, hold_pairs.empty() ? nullptr : &hold_pairs,
                              cfg.effective_jobs());
    rep.stop_reason = result.stop_reason;
    rep.epochs = result.history.size();
    rep.steps = result.steps;
    if (hold_pairs.empty()) rep.notes.push_back("holdout_frac is 0: train-only metrics, no held-out sounds");

    save_model(result.model, out_dir / "model.json");
    write_history_csv(out_dir / "history.csv", result.history);
    {
        std::set<std::string> all(ids.begin(), ids.end());
        auto out = open_out(out_dir / "split.csv");
        out << "clip_id,split\n";
        for (const auto& id : all) {
            check_csv_field(id, "clip id");
            out << id << ',' << (held.count(id) ? "holdout" : "train") << '\n';
        }
    }
    const auto preds = predict_all(result.model, data, held, "holdout", "train", cfg.effective_jobs());
    finish_report(rep, preds, coords, manifest, !hold_pairs.empty(), out_dir);
    return rep;
}

TrainEvalReport run_eval(const fs::path& model_path, const fs::path& segments_dir, const fs::path& coords_path,
                         const fs::path& manifest_path, const PipelineConfig& cfg, const fs::path& out_dir,
                         const std::optional<fs::path>& split_path) {
    const auto model = load_model(model_path, cfg.regressor);
    const auto manifest = read_manifest(manifest_path);
    const auto coords = read_coords_csv(coords_path);
    const auto data = join_segments(segments_dir, coords, manifest, cfg);
    if (data.pairs.empty()) throw Error("eval: no segments could be joined to coordinates");

    TrainEvalReport rep;
    rep.join_errors = data.join_errors;
    std::set<std::string> held;
    if (split_path) {
        std::ifstream in(*split_path);
        if (!in) throw Error("cannot read split file " + split_path->string());
        std::string line;
        std::getline(in, line);
        if (line != "clip_id,split") throw FormatError(split_path->string() + ": header must be 'clip_id,split'");
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cells = split(line, ',');
            if (cells.size() != 2 || (cells[1] != "train" && cells[1] != "holdout"))
                throw FormatError(split_path->string() + ": malformed row '" + line + "'");
            if (cells[1] == "holdout") held.insert(cells[0]);
        }
    } else {
        for (const auto& p : data.pairs) held.insert(p.clip_id);
        rep.notes.push_back("no split file: every joined segment is scored as held out");
    }
    ensure_dir(out_dir);
    const auto preds = predict_all(model, data, held, "holdout", "train", cfg.effective_jobs());
    const bool any_held = std::any_of(preds.begin(), preds.end(), [](const Prediction& p) { return p.split == "holdout"; });
    if (!any_held) rep.notes.push_back("split has no held-out clips among the joined segments: train-only metrics");
    finish_report(rep, preds, coords, manifest, any_held, out_dir);
    return rep;
}

// plot -----------------------------------------------------------------------

void write_predictions_csv(const fs::path& path, const std::vector<Prediction>& preds) {
    auto out = open_out(path);
    out << "segment,clip_id,split,target_x,target_y,pred_x,pred_y,error\n";
    for (const auto& p : preds) {
        check_csv_field(p.segment, "segment");
        check_csv_field(p.clip_id, "clip id");
        out << p.segment << ',' << p.clip_id << ',' << p.split << ',' << format_double(p.target[0]) << ','
            << format_double(p.target[1]) << ',' << format_double(p.predicted[0]) << ','
            << format_double(p.predicted[1]) << ',' << format_double(p.error) << '\n';
    }
}

std::vector<Prediction> read_predictions_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "segment,clip_id,split,target_x,target_y,pred_x,pred_y,error")
        throw FormatError(path.string() + ": unexpected header");
    std::vector<Prediction> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c = split(line, ',');
        Prediction p;
        bool ok = c.size() == 8;
        if (ok) {
            p.segment = c[0];
            p.clip_id = c[1];
            p.split = c[2];
            ok = parse_double(c[3], p.target[0]) && parse_double(c[4], p.target[1]) &&
                 parse_double(c[5], p.predicted[0]) && parse_double(c[6], p.predicted[1]) && parse_double(c[7], p.error);
        }
        if (!ok) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        out.push_back(std::move(p));
    }
    return out;
}

std::optional<ErrorPatch> error_patch(const std::vector<Prediction>& preds, const std::string& split) {
    double sx = 0.0, sy = 0.0, se = 0.0;
    std::size_t n = 0;
    for (const auto& p : preds) {
        if (p.split != split) continue;
        sx += p.predicted[0];
        sy += p.predicted[1];
        se += p.error;
        ++n;
    }
    if (n == 0) return std::nullopt;
    const double dn = static_cast<double>(n);
    return ErrorPatch{sx / dn, sy / dn, se / dn};
}

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

} // namespace

std::string render_svg(const ManifoldCoords& coords, const std::vector<std::string>& labels,
                       const std::vector<Prediction>& preds, const std::optional<ErrorPatch>& patch,
                       const std::string& title) {
    constexpr double W = 640, H = 640, L = 70, R = 150, T = 40, B = 60;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto grow = [&](double x, double y) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    };
    for (std::size_t i = 0; i < coords.size(); ++i) grow(coords.x(i), coords.y(i));
    for (const auto& p : preds) grow(p.predicted[0], p.predicted[1]);
    if (patch) {
        grow(patch->cx - patch->half_side, patch->cy - patch->half_side);
        grow(patch->cx + patch->half_side, patch->cy + patch->half_side);
    }
    if (!std::isfinite(x0)) x0 = y0 = 0.0, x1 = y1 = 1.0;
    const double px = std::max(x1 - x0, 1e-9) * 0.05, py = std::max(y1 - y0, 1e-9) * 0.05;
    x0 -= px, x1 += px, y0 -= py, y1 += py;
    const double pw = W - L - R, ph = H - T - B;
    auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return T + ph - (y - y0) / (y1 - y0) * ph; };

    std::vector<std::string> classes;
    for (const auto& l : labels)
        if (!l.empty() && std::find(classes.begin(), classes.end(), l) == classes.end()) classes.push_back(l);
    std::sort(classes.begin(), classes.end());
    auto colour = [&](std::size_t i) -> std::string {
        if (i >= labels.size() || labels[i].empty()) return "#555555";
        const auto k = static_cast<std::size_t>(std::find(classes.begin(), classes.end(), labels[i]) - classes.begin());
        return kPalette[k % std::size(kPalette)];
    };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        s << "<text x=\"" << num(L + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
          << xml_escape(title) << "</text>\n";
    // Axes and ticks.
    s << "<g stroke=\"black\" stroke-width=\"1\">\n";
    s << "<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\"" << T + ph << "\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph << "\"/>\n";
    s << "</g>\n";
    for (int t = 0; t <= 4; ++t) {
        const double vx = x0 + (x1 - x0) * t / 4.0, vy = y0 + (y1 - y0) * t / 4.0;
        s << "<line x1=\"" << num(sx(vx)) << "\" y1=\"" << T + ph << "\" x2=\"" << num(sx(vx)) << "\" y2=\""
          << T + ph + 5 << "\" stroke=\"black\"/>";
        s << "<text x=\"" << num(sx(vx)) << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\">"
          << tick_label(vx) << "</text>\n";
        s << "<line x1=\"" << L - 5 << "\" y1=\"" << num(sy(vy)) << "\" x2=\"" << L << "\" y2=\"" << num(sy(vy))
          << "\" stroke=\"black\"/>";
        s << "<text x=\"" << L - 8 << "\" y=\"" << num(sy(vy) + 4) << "\" text-anchor=\"end\">" << tick_label(vy)
          << "</text>\n";
    }
    s << "<text x=\"" << num(L + pw / 2) << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">x</text>\n";
    s << "<text x=\"20\" y=\"" << num(T + ph / 2) << "\" text-anchor=\"middle\">y</text>\n";

    if (patch) {
        const double side = 2.0 * patch->half_side;
        s << "<rect class=\"error-patch\" x=\"" << num(sx(patch->cx - patch->half_side)) << "\" y=\""
          << num(sy(patch->cy + patch->half_side)) << "\" width=\"" << num(side / (x1 - x0) * pw)
          << "\" height=\"" << num(side / (y1 - y0) * ph) << "\" fill=\"#d62728\" fill-opacity=\"0.25\""
          << " stroke=\"#d62728\"/>\n";
    }
    s << "<g fill-opacity=\"0.7\">\n";
    for (std::size_t i = 0; i < coords.size(); ++i)
        s << "<circle cx=\"" << num(sx(coords.x(i))) << "\" cy=\"" << num(sy(coords.y(i))) << "\" r=\"2.5\" fill=\""
          << colour(i) << "\"/>\n";
    s << "</g>\n";
    if (!preds.empty()) {
        s << "<g stroke=\"black\" stroke-width=\"1.2\">\n";
        for (const auto& p : preds) {
            const double cx = sx(p.predicted[0]), cy = sy(p.predicted[1]);
            s << "<path d=\"M" << num(cx - 3) << ' ' << num(cy - 3) << "L" << num(cx + 3) << ' ' << num(cy + 3)
              << "M" << num(cx - 3) << ' ' << num(cy + 3) << "L" << num(cx + 3) << ' ' << num(cy - 3) << "\"/>\n";
        }
        s << "</g>\n";
    }
    // Legend.
    double ly = T + 10;
    for (std::size_t k = 0; k < classes.size(); ++k, ly += 16) {
        s << "<circle cx=\"" << W - R + 20 << "\" cy=\"" << num(ly) << "\" r=\"4\" fill=\""
          << kPalette[k % std::size(kPalette)] << "\"/>";
        s << "<text x=\"" << W - R + 30 << "\" y=\"" << num(ly + 4) << "\">" << xml_escape(classes[k]) << "</text>\n";
    }
    if (!preds.empty()) {
        s << "<text x=\"" << W - R + 14 << "\" y=\"" << num(ly + 4) << "\">x  predicted</text>\n";
        ly += 16;
    }
    if (patch)
        s << "<rect x=\"" << W - R + 14 << "\" y=\"" << num(ly - 4) << "\" width=\"10\" height=\"10\" fill=\"#d62728\""
          << " fill-opacity=\"0.25\" stroke=\"#d62728\"/><text x=\"" << W - R + 30 << "\" y=\"" << num(ly + 5)
          << "\">mean error</text>\n";
    s << "</svg>\n";
    return s.str();
}

} // namespace touchmap
