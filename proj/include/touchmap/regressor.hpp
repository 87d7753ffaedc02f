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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "touchmap/audio.hpp"
#include "touchmap/dsp.hpp"

namespace touchmap {

/// Five 3x3 same-padded conv layers with ReLU, 2x2 truncating max-pool after
/// the first four, global average pooling and a dense 2-unit head.
struct RegressorConfig {
    std::array<int, 5> conv_channels{8, 16, 32, 64, 64};
    int input_bins = 257;
    int input_frames = 20;
    double lr = 1e-3;
    double momentum = 0.9;
    int batch = 16;
    int epochs = 100;
    std::uint64_t seed = 1;
    // Early stop when the train metric improves by less than this fraction over `patience` epochs.
    double min_rel_improvement = 1e-4;
    int patience = 10;
    // Optional: stop as soon as the full-pass train metric drops below this (0 = off).
    double target_metric = 0.0;
    // Optional cap on minibatch updates (0 = off).
    long long max_steps = 0;

    void validate() const;
    bool same_architecture(const RegressorConfig& o) const;
};

inline constexpr int kKernel = 3;
inline constexpr int kPool = 2;

struct TensorInfo {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Feature-map geometry: channels x frames x bins.
struct MapShape {
    int channels = 0;
    int frames = 0;
    int bins = 0;
    std::size_t size() const { return static_cast<std::size_t>(channels) * frames * bins; }
};

template <typename T>
struct Workspace;

/// The convolutional regressor with all parameters in one flat vector.
/// Inputs are frame-major (frame, bin), matching Spectrogram::mag.
template <typename T>
class Network {
public:
    explicit Network(const RegressorConfig& cfg);

    const RegressorConfig& config() const { return cfg_; }
    const std::vector<TensorInfo>& tensors() const { return tensors_; }
    const TensorInfo& tensor(const std::string& name) const;

    std::vector<T>& params() { return params_; }
    const std::vector<T>& params() const { return params_; }
    std::span<T> param_view(const std::string& name);

    /// Map shapes after each conv block: input, pool1..pool4, conv5.
    const std::vector<MapShape>& shape_chain() const { return shapes_; }
    std::size_t input_size() const { return static_cast<std::size_t>(cfg_.input_bins) * cfg_.input_frames; }

    /// He-normal weights, zero biases.
    void init(std::uint64_t seed);

    std::array<T, 2> forward(std::span<const T> input) const;
    std::array<T, 2> forward(std::span<const T> input, Workspace<T>& ws) const;

    /// Squared-distance loss for one example; adds scale * dLoss/dparam into grad.
    T accumulate_gradient(std::span<const T> input, const std::array<T, 2>& target, std::span<T> grad,
                          Workspace<T>& ws, T scale = T(1)) const;

private:
    RegressorConfig cfg_;
    std::vector<TensorInfo> tensors_;
    std::vector<MapShape> shapes_;
    std::vector<T> params_;
};

template <typename T>
struct Workspace {
    std::vector<std::vector<T>> pre;     // conv outputs before ReLU, per layer
    std::vector<std::vector<T>> act;     // after ReLU
    std::vector<std::vector<T>> pooled;  // after pooling (layers 0..3)
    std::vector<std::vector<std::uint32_t>> argmax;
    std::vector<std::vector<T>> col;     // im2col of each conv input
    std::vector<T> gap;
    std::vector<T> grad_a, grad_b, grad_col;
};

/// Squared Euclidean distance (the training loss).
double loss(const std::array<double, 2>& pred, const std::array<double, 2>& target);
/// Unsquared distance (the reported metric).
double euclidean_error(const std::array<double, 2>& pred, const std::array<double, 2>& target);

struct TrainingPair {
    std::vector<double> features;  // log-magnitude, frame-major input_frames x input_bins
    std::array<double, 2> target{};
    std::string clip_id;
};

/// Float network plus the input and target normalisation fitted on the training set.
struct RegressorModel {
    Network<float> net;
    std::vector<float> input_mean;    // per bin
    std::vector<float> input_std;     // per bin
    std::array<float, 2> target_mean{0.0f, 0.0f};
    std::array<float, 2> target_scale{1.0f, 1.0f};

    explicit RegressorModel(const RegressorConfig& cfg = {});

    /// Normalise features, run the network, de-standardise the output.
    std::array<double, 2> predict(std::span<const double> features) const;

    bool operator==(const RegressorModel& o) const;
};

struct HistoryRow {
    int epoch = 0;
    double train_metric = 0.0;
    double holdout_metric = -1.0;  // negative when no holdout set is given
};

struct TrainResult {
    RegressorModel model;
    std::vector<HistoryRow> history;
    long long steps = 0;
    std::string stop_reason;
};

/// Minibatch SGD with momentum on standardised targets. Per-example
/// gradients are summed in batch order, so `jobs` does not change the result.
TrainResult train(const std::vector<TrainingPair>& pairs, const RegressorConfig& cfg,
                  const std::vector<TrainingPair>* holdout = nullptr, int jobs = 1);

struct Evaluation {
    double mean_error = 0.0;
    std::vector<double> per_item;
    std::vector<std::array<double, 2>> predictions;
};

Evaluation evaluate(const RegressorModel& model, const std::vector<TrainingPair>& pairs, int jobs = 1);

/// Log-magnitude features of a segment with the pipeline's STFT geometry.
std::vector<double> segment_features(const AudioClip& segment, const StftConfig& stft_cfg = {},
                                     double log_floor = kLogMagnitudeFloor);

/// Checkpoint: JSON header at `header_path`, float32 little-endian blob next to
/// it with extension `.bin`.
void save_model(const RegressorModel& model, const std::filesystem::path& header_path);
RegressorModel load_model(const std::filesystem::path& header_path);
/// Also rejects a checkpoint whose architecture differs from `expected`.
RegressorModel load_model(const std::filesystem::path& header_path, const RegressorConfig& expected);

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history);

extern template class Network<float>;
extern template class Network<double>;

} // namespace touchmap
