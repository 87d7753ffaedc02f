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
#include <optional>
#include <string>
#include <vector>

#include "touchmap/corpus.hpp"
#include "touchmap/detector.hpp"
#include "touchmap/dsp.hpp"
#include "touchmap/manifold.hpp"
#include "touchmap/regressor.hpp"

namespace touchmap {

/// Default input locations; command-line flags take precedence.
struct PathsConfig {
    std::string audio_dir;
    std::string embeddings;
    std::string manifest;
    std::string segments_dir;
    std::string coords;
    std::string model;
    std::string out = "out";
};

/// Everything a pipeline run depends on besides the input files.
///
/// The regressor's input geometry is not configurable on its own: it follows
/// from the STFT settings and the detector's segment length. Module seeds are
/// derived from `seed`.
struct PipelineConfig {
    StftConfig dsp;
    double log_floor = kLogMagnitudeFloor;
    DetectorConfig detector;
    ManifoldConfig manifold;
    RegressorConfig regressor;
    double holdout_frac = 0.2;
    PathsConfig paths;
    std::uint64_t seed = 42;
    int jobs = 1;
    // Forces one thread everywhere regardless of `jobs`.
    bool deterministic = false;

    /// Derives the dependent fields and validates every section.
    void finalize();
    int effective_jobs() const { return deterministic ? 1 : jobs; }
};

/// Strict JSON reader: unknown keys and wrongly typed values are ConfigErrors.
/// The returned config is finalized.
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const PipelineConfig& cfg);

/// Per-file failure in a batch stage.
struct FileError {
    std::string file;
    std::string message;
};

// features ---------------------------------------------------------------

struct FeaturesReport {
    std::size_t files = 0;
    std::size_t frames = 0;
    std::vector<FileError> failures;
};

/// One CSV per WAV: frame,time_s,energy,flatness,onset,centroid_hz,zcr.
/// `input` may be a single WAV or a directory of them.
FeaturesReport run_features(const std::filesystem::path& input, const PipelineConfig& cfg,
                            const std::filesystem::path& out_dir);

// detect -----------------------------------------------------------------

struct DetectReport {
    std::size_t clips = 0;
    std::size_t events = 0;
    std::vector<FileError> failures;
    std::vector<std::string> warnings;
    double audio_seconds = 0.0;
    double events_per_clip() const { return clips ? static_cast<double>(events) / static_cast<double>(clips) : 0.0; }
};

/// Sorted `*.wav` files directly inside `dir`.
std::vector<std::filesystem::path> list_wavs(const std::filesystem::path& dir);

/// Segment file name for event `index` of `clip_id`.
std::string segment_name(const std::string& clip_id, std::size_t index);
/// Inverse of segment_name; nullopt for names it did not produce.
std::optional<std::string> clip_id_from_segment(const std::string& filename);

/// Detects events in every WAV of `audio_dir`. Writes `events.jsonl` and
/// `segments/<clip_id>__evNNN.wav` under `out_dir`. The clip id is the file stem.
DetectReport run_detect(const std::filesystem::path& audio_dir, const PipelineConfig& cfg,
                        const std::filesystem::path& out_dir);

// reduce -----------------------------------------------------------------

struct ReduceReport {
    std::size_t points = 0;
    std::size_t dim = 0;
};

/// Labels for embedding rows from a manifest's class field ("" when absent).
std::vector<std::string> labels_from_manifest(const std::vector<ManifestRecord>& manifest, std::size_t n_rows);

/// Writes `coords.csv` and `coords.svg` under `out_dir`. Points are coloured
/// by class when a manifest with classes is given.
ReduceReport run_reduce(const std::filesystem::path& embeddings, const PipelineConfig& cfg,
                        const std::filesystem::path& out_dir,
                        const std::optional<std::filesystem::path>& manifest = std::nullopt);

// train / eval -----------------------------------------------------------

/// Training pairs built from segment WAVs joined to coordinates through the
/// manifest (clip_id -> embedding_row -> coords row).
struct JoinedData {
    std::vector<TrainingPair> pairs;
    std::vector<std::string> segment_files;  // parallel to pairs
    std::vector<std::string> join_errors;
};

JoinedData join_segments(const std::filesystem::path& segments_dir, const ManifoldCoords& coords,
                         const std::vector<ManifestRecord>& manifest, const PipelineConfig& cfg);

/// Held-out clip ids: a seeded shuffle of the distinct ids, first
/// round(frac * n) taken. Sorted.
std::vector<std::string> holdout_clips(std::vector<std::string> clip_ids, double frac, std::uint64_t seed);

/// Per-class centroid of the coordinates, over every manifest row with a class.
struct ClusterCenters {
    std::vector<std::string> names;
    std::vector<std::array<double, 2>> centers;
};
ClusterCenters class_centers(const ManifoldCoords& coords, const std::vector<ManifestRecord>& manifest);

/// Largest per-axis extent of the coordinate set.
double coordinate_span(const ManifoldCoords& coords);

struct SplitMetrics {
    std::size_t pairs = 0;
    std::size_t clips = 0;
    double mean_error = 0.0;
    std::optional<double> nearest_cluster_accuracy;
};

struct TrainEvalReport {
    SplitMetrics train;
    std::optional<SplitMetrics> holdout;
    double coordinate_span = 0.0;
    std::vector<std::string> join_errors;
    std::vector<std::string> notes;
    std::string stop_reason;
    std::size_t epochs = 0;
    long long steps = 0;

    /// Held-out mean error as a fraction of the coordinate span.
    std::optional<double> holdout_error_fraction() const;
    std::string to_json() const;
};

/// Splits by clip id, trains, evaluates, and writes model.json/model.bin,
/// history.csv, split.csv, predictions.csv, report.json and errors.svg under
/// `out_dir`. Throws when fewer than 10 training pairs remain.
TrainEvalReport run_train_eval(const std::filesystem::path& segments_dir, const std::filesystem::path& coords_path,
                               const std::filesystem::path& manifest_path, const PipelineConfig& cfg,
                               const std::filesystem::path& out_dir);

/// Evaluates a saved model on the joined segments. With a split file from
/// run_train_eval the metrics are reported per split; otherwise all pairs
/// count as held out.
TrainEvalReport run_eval(const std::filesystem::path& model_path, const std::filesystem::path& segments_dir,
                         const std::filesystem::path& coords_path, const std::filesystem::path& manifest_path,
                         const PipelineConfig& cfg, const std::filesystem::path& out_dir,
                         const std::optional<std::filesystem::path>& split_path = std::nullopt);

// plot -------------------------------------------------------------------

struct Prediction {
    std::string segment;
    std::string clip_id;
    std::string split;
    std::array<double, 2> target{};
    std::array<double, 2> predicted{};
    double error = 0.0;
};

void write_predictions_csv(const std::filesystem::path& path, const std::vector<Prediction>& preds);
std::vector<Prediction> read_predictions_csv(const std::filesystem::path& path);

/// Shaded square of side 2 * mean error centred on the mean predicted point.
struct ErrorPatch {
    double cx = 0.0;
    double cy = 0.0;
    double half_side = 0.0;
};
std::optional<ErrorPatch> error_patch(const std::vector<Prediction>& preds, const std::string& split = "holdout");

/// Scatter plot with axes; `labels` (parallel to coords, may be empty)
/// select colours. Predictions are drawn as crosses.
std::string render_svg(const ManifoldCoords& coords, const std::vector<std::string>& labels,
                       const std::vector<Prediction>& preds = {}, const std::optional<ErrorPatch>& patch = {},
                       const std::string& title = "");

} // namespace touchmap
