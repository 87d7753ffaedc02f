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

#include "touchmap/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Core>

#include "json_util.hpp"
#include "touchmap/error.hpp"
#include "touchmap/util.hpp"

namespace touchmap {

void RegressorConfig::validate() const {
    for (int c : conv_channels)
        if (c < 1) throw ConfigError("regressor.conv_channels must all be >= 1");
    if (input_bins < 16 || input_frames < 16)
        throw ConfigError("regressor: input must be at least 16 x 16 to survive four 2x2 pools");
    if (!(lr >= 0.0)) throw ConfigError("regressor.lr must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("regressor.momentum must be in [0, 1)");
    if (batch < 1) throw ConfigError("regressor.batch must be >= 1");
    if (epochs < 1) throw ConfigError("regressor.epochs must be >= 1");
    if (patience < 1) throw ConfigError("regressor.patience must be >= 1");
    if (!(min_rel_improvement >= 0.0)) throw ConfigError("regressor.min_rel_improvement must be >= 0");
    if (max_steps < 0) throw ConfigError("regressor.max_steps must be >= 0");
}

bool RegressorConfig::same_architecture(const RegressorConfig& o) const {
    return conv_channels == o.conv_channels && input_bins == o.input_bins && input_frames == o.input_frames;
}

// Network -----------------------------------------------------------------

template <typename T>
Network<T>::Network(const RegressorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::size_t offset = 0;
    auto add = [&](std::string name, std::vector<int> shape) {
        std::size_t size = 1;
        for (int s : shape) size *= static_cast<std::size_t>(s);
        tensors_.push_back({std::move(name), std::move(shape), offset, size});
        offset += size;
    };
    int in_ch = 1;
    for (int l = 0; l < 5; ++l) {
        const int out_ch = cfg_.conv_channels[static_cast<std::size_t>(l)];
        add("conv" + std::to_string(l + 1) + ".weight", {out_ch, in_ch, kKernel, kKernel});
        add("conv" + std::to_string(l + 1) + ".bias", {out_ch});
        in_ch = out_ch;
    }
    add("dense.weight", {2, in_ch});
    add("dense.bias", {2});
    params_.assign(offset, T(0));

    MapShape s{1, cfg_.input_frames, cfg_.input_bins};
    shapes_.push_back(s);
    for (int l = 0; l < 5; ++l) {
        s.channels = cfg_.conv_channels[static_cast<std::size_t>(l)];
        if (l < 4) {
            // Truncating pool: odd trailing rows/columns are dropped.
            s.frames /= kPool;
            s.bins /= kPool;
            if (s.frames < 1 || s.bins < 1) throw ConfigError("regressor: input too small for four pools");
        }
        shapes_.push_back(s);
    }
}

template <typename T>
const TensorInfo& Network<T>::tensor(const std::string& name) const {
    for (const auto& t : tensors_)
        if (t.name == name) return t;
    throw Error("no tensor named " + name);
}

template <typename T>
std::span<T> Network<T>::param_view(const std::string& name) {
    const auto& t = tensor(name);
    return {params_.data() + t.offset, t.size};
}

template <typename T>
void Network<T>::init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (const auto& t : tensors_) {
        T* p = params_.data() + t.offset;
        if (t.shape.size() == 1) {
            std::fill(p, p + t.size, T(0));
            continue;
        }
        const bool conv = t.shape.size() == 4;
        const double fan_in = conv ? static_cast<double>(t.shape[1]) * kKernel * kKernel : t.shape[1];
        const double stddev = conv ? std::sqrt(2.0 / fan_in) : std::sqrt(1.0 / fan_in);
        for (std::size_t i = 0; i < t.size; ++i) p[i] = static_cast<T>(stddev * gauss(rng));
    }
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// col has (channels * 9) rows of frames * bins; zero outside the map.
template <typename T>
void im2col(const T* in, const MapShape& is, std::vector<T>& col) {
    const int frames = is.frames, bins = is.bins;
    const std::size_t plane = static_cast<std::size_t>(frames) * bins;
    col.assign(static_cast<std::size_t>(is.channels) * kKernel * kKernel * plane, T(0));
    for (int i = 0; i < is.channels; ++i) {
        const T* src_plane = in + i * plane;
        for (int dt = 0; dt < kKernel; ++dt) {
            for (int df = 0; df < kKernel; ++df) {
                T* row = col.data() + ((static_cast<std::size_t>(i) * kKernel + dt) * kKernel + df) * plane;
                const int f0 = std::max(0, 1 - df), f1 = std::min(bins, bins + 1 - df);
                for (int t = 0; t < frames; ++t) {
                    const int ts = t + dt - 1;
                    if (ts < 0 || ts >= frames) continue;
                    const T* src = src_plane + static_cast<std::size_t>(ts) * bins + (df - 1);
                    T* dst = row + static_cast<std::size_t>(t) * bins;
                    for (int f = f0; f < f1; ++f) dst[f] = src[f];
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const std::vector<T>& col, const MapShape& is, T* din) {
    const int frames = is.frames, bins = is.bins;
    const std::size_t plane = static_cast<std::size_t>(frames) * bins;
    for (int i = 0; i < is.channels; ++i) {
        T* dst_plane = din + i * plane;
        for (int dt = 0; dt < kKernel; ++dt) {
            for (int df = 0; df < kKernel; ++df) {
                const T* row = col.data() + ((static_cast<std::size_t>(i) * kKernel + dt) * kKernel + df) * plane;
                const int f0 = std::max(0, 1 - df), f1 = std::min(bins, bins + 1 - df);
                for (int t = 0; t < frames; ++t) {
                    const int ts = t + dt - 1;
                    if (ts < 0 || ts >= frames) continue;
                    T* dst = dst_plane + static_cast<std::size_t>(ts) * bins + (df - 1);
                    const T* src = row + static_cast<std::size_t>(t) * bins;
                    for (int f = f0; f < f1; ++f) dst[f] += src[f];
                }
            }
        }
    }
}

template <typename T>
void conv_forward(const std::vector<T>& col, const MapShape& is, const T* w, const T* b, int out_ch, T* out) {
    const auto plane = static_cast<Eigen::Index>(is.frames) * is.bins;
    const auto k = static_cast<Eigen::Index>(is.channels) * kKernel * kKernel;
    Eigen::Map<const RowMat<T>> W(w, out_ch, k);
    Eigen::Map<const RowMat<T>> C(col.data(), k, plane);
    Eigen::Map<RowMat<T>> Y(out, out_ch, plane);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(b, out_ch);
    Y.noalias() = W * C;
    Y.colwise() += bias;
}

// dpre: gradient w.r.t. conv output (already ReLU-masked).
template <typename T>
void conv_backward(const std::vector<T>& col, const MapShape& is, const T* w, int out_ch, const T* dpre, T* dw,
                   T* db, std::vector<T>* dcol) {
    const auto plane = static_cast<Eigen::Index>(is.frames) * is.bins;
    const auto k = static_cast<Eigen::Index>(is.channels) * kKernel * kKernel;
    Eigen::Map<const RowMat<T>> G(dpre, out_ch, plane);
    Eigen::Map<const RowMat<T>> C(col.data(), k, plane);
    Eigen::Map<RowMat<T>> dW(dw, out_ch, k);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dB(db, out_ch);
    dW.noalias() += G * C.transpose();
    dB += G.rowwise().sum();
    if (dcol) {
        dcol->resize(static_cast<std::size_t>(k * plane));
        Eigen::Map<const RowMat<T>> W(w, out_ch, k);
        Eigen::Map<RowMat<T>> dC(dcol->data(), k, plane);
        dC.noalias() = W.transpose() * G;
    }
}

template <typename T>
void max_pool(const T* in, const MapShape& is, T* out, std::uint32_t* arg) {
    const int of = is.frames / kPool, ob = is.bins / kPool;
    for (int c = 0; c < is.channels; ++c) {
        const std::size_t ibase = static_cast<std::size_t>(c) * is.frames * is.bins;
        const std::size_t obase = static_cast<std::size_t>(c) * of * ob;
        for (int t = 0; t < of; ++t) {
            for (int f = 0; f < ob; ++f) {
                std::size_t best = ibase + static_cast<std::size_t>(2 * t) * is.bins + 2 * f;
                for (int dt = 0; dt < kPool; ++dt)
                    for (int df = 0; df < kPool; ++df) {
                        const std::size_t idx = ibase + static_cast<std::size_t>(2 * t + dt) * is.bins + 2 * f + df;
                        if (in[idx] > in[best]) best = idx;
                    }
                out[obase + static_cast<std::size_t>(t) * ob + f] = in[best];
                arg[obase + static_cast<std::size_t>(t) * ob + f] = static_cast<std::uint32_t>(best);
            }
        }
    }
}

} // namespace

template <typename T>
std::array<T, 2> Network<T>::forward(std::span<const T> input) const {
    Workspace<T> ws;
    return forward(input, ws);
}

template <typename T>
std::array<T, 2> Network<T>::forward(std::span<const T> input, Workspace<T>& ws) const {
    if (input.size() != input_size())
        throw Error("regressor: input has " + std::to_string(input.size()) + " values, expected " +
                    std::to_string(input_size()) + " (" + std::to_string(cfg_.input_frames) + " frames x " +
                    std::to_string(cfg_.input_bins) + " bins)");
    ws.pre.resize(5);
    ws.act.resize(5);
    ws.pooled.resize(4);
    ws.argmax.resize(4);
    ws.col.resize(5);
    const T* cur = input.data();
    MapShape in_shape = shapes_[0];
    for (int l = 0; l < 5; ++l) {
        const int out_ch = cfg_.conv_channels[static_cast<std::size_t>(l)];
        const MapShape out_shape{out_ch, in_shape.frames, in_shape.bins};
        const auto& wt = tensors_[static_cast<std::size_t>(2 * l)];
        const auto& bt = tensors_[static_cast<std::size_t>(2 * l + 1)];
        auto& pre = ws.pre[static_cast<std::size_t>(l)];
        auto& act = ws.act[static_cast<std::size_t>(l)];
        pre.resize(out_shape.size());
        act.resize(out_shape.size());
        auto& col = ws.col[static_cast<std::size_t>(l)];
        im2col(cur, in_shape, col);
        conv_forward(col, in_shape, params_.data() + wt.offset, params_.data() + bt.offset, out_ch, pre.data());
        for (std::size_t p = 0; p < pre.size(); ++p) act[p] = pre[p] > T(0) ? pre[p] : T(0);
        if (l < 4) {
            auto& pooled = ws.pooled[static_cast<std::size_t>(l)];
            auto& arg = ws.argmax[static_cast<std::size_t>(l)];
            in_shape = shapes_[static_cast<std::size_t>(l + 1)];
            pooled.resize(in_shape.size());
            arg.resize(in_shape.size());
            max_pool(act.data(), out_shape, pooled.data(), arg.data());
            cur = pooled.data();
        } else {
            in_shape = out_shape;
        }
    }
    const MapShape& last = shapes_.back();
    const std::size_t plane = static_cast<std::size_t>(last.frames) * last.bins;
    ws.gap.assign(static_cast<std::size_t>(last.channels), T(0));
    const auto& act = ws.act[4];
    for (int c = 0; c < last.channels; ++c) {
        T acc = T(0);
        for (std::size_t p = 0; p < plane; ++p) acc += act[c * plane + p];
        ws.gap[static_cast<std::size_t>(c)] = acc / static_cast<T>(plane);
    }
    const auto& dw = tensors_[10];
    const auto& dbias = tensors_[11];
    std::array<T, 2> y{};
    for (int k = 0; k < 2; ++k) {
        T acc = params_[dbias.offset + static_cast<std::size_t>(k)];
        for (int c = 0; c < last.channels; ++c)
            acc += params_[dw.offset + static_cast<std::size_t>(k * last.channels + c)] * ws.gap[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(k)] = acc;
    }
    return y;
}

template <typename T>
T Network<T>::accumulate_gradient(std::span<const T> input, const std::array<T, 2>& target, std::span<T> grad,
                                  Workspace<T>& ws, T scale) const {
    if (grad.size() != params_.size()) throw Error("regressor: gradient buffer has wrong size");
    const auto y = forward(input, ws);
    const T e0 = y[0] - target[0], e1 = y[1] - target[1];
    const T l = e0 * e0 + e1 * e1;
    const std::array<T, 2> dy{T(2) * e0 * scale, T(2) * e1 * scale};

    const MapShape& last = shapes_.back();
    const auto& dwt = tensors_[10];
    const auto& dbt = tensors_[11];
    std::vector<T> dgap(static_cast<std::size_t>(last.channels), T(0));
    for (int k = 0; k < 2; ++k) {
        grad[dbt.offset + static_cast<std::size_t>(k)] += dy[static_cast<std::size_t>(k)];
        for (int c = 0; c < last.channels; ++c) {
            const std::size_t wi = dwt.offset + static_cast<std::size_t>(k * last.channels + c);
            grad[wi] += dy[static_cast<std::size_t>(k)] * ws.gap[static_cast<std::size_t>(c)];
            dgap[static_cast<std::size_t>(c)] += params_[wi] * dy[static_cast<std::size_t>(k)];
        }
    }

    // d(act5): average pooling spreads the gradient evenly.
    const std::size_t plane = static_cast<std::size_t>(last.frames) * last.bins;
    auto& dact = ws.grad_a;
    dact.assign(last.size(), T(0));
    for (int c = 0; c < last.channels; ++c)
        std::fill(dact.begin() + static_cast<std::ptrdiff_t>(c * plane),
                  dact.begin() + static_cast<std::ptrdiff_t>((c + 1) * plane),
                  dgap[static_cast<std::size_t>(c)] / static_cast<T>(plane));

    auto& din = ws.grad_b;
    for (int l = 4; l >= 0; --l) {
        const auto li = static_cast<std::size_t>(l);
        const int out_ch = cfg_.conv_channels[li];
        const MapShape in_shape = shapes_[li];
        const auto& pre = ws.pre[li];
        for (std::size_t p = 0; p < pre.size(); ++p)
            if (!(pre[p] > T(0))) dact[p] = T(0);
        const auto& wt = tensors_[2 * li];
        const auto& bt = tensors_[2 * li + 1];
        conv_backward(ws.col[li], in_shape, params_.data() + wt.offset, out_ch, dact.data(), grad.data() + wt.offset,
                      grad.data() + bt.offset, l > 0 ? &ws.grad_col : nullptr);
        if (l > 0) {
            din.assign(in_shape.size(), T(0));
            col2im_add(ws.grad_col, in_shape, din.data());
        }
        if (l == 0) break;
        // Un-pool into the previous conv output.
        const MapShape prev_conv{in_shape.channels, shapes_[li - 1].frames, shapes_[li - 1].bins};
        dact.assign(prev_conv.size(), T(0));
        const auto& arg = ws.argmax[li - 1];
        for (std::size_t p = 0; p < din.size(); ++p) dact[arg[p]] += din[p];
    }
    return l;
}

template class Network<float>;
template class Network<double>;

// Loss / model ------------------------------------------------------------

double loss(const std::array<double, 2>& pred, const std::array<double, 2>& target) {
    const double a = pred[0] - target[0], b = pred[1] - target[1];
    return a * a + b * b;
}

double euclidean_error(const std::array<double, 2>& pred, const std::array<double, 2>& target) {
    return std::sqrt(loss(pred, target));
}

RegressorModel::RegressorModel(const RegressorConfig& cfg)
    : net(cfg),
      input_mean(static_cast<std::size_t>(cfg.input_bins), 0.0f),
      input_std(static_cast<std::size_t>(cfg.input_bins), 1.0f) {}

namespace {

std::vector<float> normalise(const RegressorModel& m, std::span<const double> features) {
    const auto bins = static_cast<std::size_t>(m.net.config().input_bins);
    if (features.size() != m.net.input_size())
        throw Error("regressor: feature matrix has " + std::to_string(features.size()) + " values, expected " +
                    std::to_string(m.net.input_size()));
    std::vector<float> out(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        const std::size_t k = i % bins;
        out[i] = static_cast<float>((features[i] - m.input_mean[k]) / m.input_std[k]);
    }
    return out;
}

std::array<double, 2> destandardise(const RegressorModel& m, const std::array<float, 2>& y) {
    return {static_cast<double>(y[0]) * m.target_scale[0] + m.target_mean[0],
            static_cast<double>(y[1]) * m.target_scale[1] + m.target_mean[1]};
}

} // namespace

std::array<double, 2> RegressorModel::predict(std::span<const double> features) const {
    const auto x = normalise(*this, features);
    return destandardise(*this, net.forward(x));
}

bool RegressorModel::operator==(const RegressorModel& o) const {
    return net.config().same_architecture(o.net.config()) && net.params() == o.net.params() &&
           input_mean == o.input_mean && input_std == o.input_std && target_mean == o.target_mean &&
           target_scale == o.target_scale;
}

Evaluation evaluate(const RegressorModel& model, const std::vector<TrainingPair>& pairs, int jobs) {
    if (pairs.empty()) throw Error("evaluate: no pairs");
    Evaluation ev;
    ev.per_item.resize(pairs.size());
    ev.predictions.resize(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        thread_local Workspace<float> ws;
        const auto x = normalise(model, pairs[i].features);
        ev.predictions[i] = destandardise(model, model.net.forward(x, ws));
        ev.per_item[i] = euclidean_error(ev.predictions[i], pairs[i].target);
    });
    ev.mean_error = std::accumulate(ev.per_item.begin(), ev.per_item.end(), 0.0) / static_cast<double>(pairs.size());
    return ev;
}

TrainResult train(const std::vector<TrainingPair>& pairs, const RegressorConfig& cfg,
                  const std::vector<TrainingPair>* holdout, int jobs) {
    cfg.validate();
    if (pairs.empty()) throw Error("train: empty dataset");
    TrainResult res{RegressorModel(cfg), {}, 0, "epochs"};
    RegressorModel& model = res.model;
    const auto bins = static_cast<std::size_t>(cfg.input_bins);
    const std::size_t in_size = model.net.input_size();

    // Per-bin input statistics and per-axis target statistics.
    std::vector<double> sum(bins, 0.0), sq(bins, 0.0);
    std::array<double, 2> tsum{0, 0}, tsq{0, 0};
    for (const auto& p : pairs) {
        if (p.features.size() != in_size)
            throw Error("train: pair '" + p.clip_id + "' has " + std::to_string(p.features.size()) +
                        " feature values, expected " + std::to_string(in_size));
        if (!std::isfinite(p.target[0]) || !std::isfinite(p.target[1]))
            throw Error("train: pair '" + p.clip_id + "' has a non-finite target");
        for (std::size_t i = 0; i < in_size; ++i) {
            sum[i % bins] += p.features[i];
            sq[i % bins] += p.features[i] * p.features[i];
        }
        for (int a = 0; a < 2; ++a) {
            tsum[a] += p.target[a];
            tsq[a] += p.target[a] * p.target[a];
        }
    }
    const double count = static_cast<double>(pairs.size()) * cfg.input_frames;
    for (std::size_t k = 0; k < bins; ++k) {
        const double mean = sum[k] / count;
        const double var = std::max(0.0, sq[k] / count - mean * mean);
        model.input_mean[k] = static_cast<float>(mean);
        const double sd = std::sqrt(var);
        model.input_std[k] = sd > 1e-6 ? static_cast<float>(sd) : 1.0f;
    }
    const double np = static_cast<double>(pairs.size());
    for (int a = 0; a < 2; ++a) {
        const double mean = tsum[a] / np;
        const double sd = std::sqrt(std::max(0.0, tsq[a] / np - mean * mean));
        model.target_mean[a] = static_cast<float>(mean);
        model.target_scale[a] = sd > 1e-12 ? static_cast<float>(sd) : 1.0f;
    }

    std::vector<std::vector<float>> xs;
    std::vector<std::array<float, 2>> ys;
    xs.reserve(pairs.size());
    for (const auto& p : pairs) {
        xs.push_back(normalise(model, p.features));
        ys.push_back({static_cast<float>((p.target[0] - model.target_mean[0]) / model.target_scale[0]),
                      static_cast<float>((p.target[1] - model.target_mean[1]) / model.target_scale[1])});
    }

    model.net.init(cfg.seed);
    auto& params = model.net.params();
    std::vector<float> velocity(params.size(), 0.0f), grad(params.size(), 0.0f);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
    const auto lr = static_cast<float>(cfg.lr);
    const auto mom = static_cast<float>(cfg.momentum);
    const auto batch = static_cast<std::size_t>(cfg.batch);
    // One gradient buffer per batch slot; summed in slot order afterwards.
    std::vector<std::vector<float>> slot_grad(std::min(batch, pairs.size()), std::vector<float>(params.size()));
    std::vector<float> slot_loss(slot_grad.size());
    std::vector<Workspace<float>> slot_ws(jobs > 1 ? slot_grad.size() : 1);

    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    bool stop = false;
    for (int epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size() && !stop; start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const std::size_t m = end - start;
            const float scale = 1.0f / static_cast<float>(m);
            parallel_for(m, jobs, [&](std::size_t b) {
                auto& g = slot_grad[b];
                std::fill(g.begin(), g.end(), 0.0f);
                const std::size_t idx = order[start + b];
                slot_loss[b] = model.net.accumulate_gradient(xs[idx], ys[idx], g, slot_ws[jobs > 1 ? b : 0], scale);
            });
            std::fill(grad.begin(), grad.end(), 0.0f);
            for (std::size_t b = 0; b < m; ++b) {
                if (!std::isfinite(slot_loss[b])) throw Error("train: non-finite loss at epoch " + std::to_string(epoch));
                const auto& g = slot_grad[b];
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
            }
            for (std::size_t i = 0; i < params.size(); ++i) {
                velocity[i] = mom * velocity[i] - lr * grad[i];
                params[i] += velocity[i];
            }
            ++res.steps;
            if (cfg.max_steps > 0 && res.steps >= cfg.max_steps) {
                stop = true;
                res.stop_reason = "max_steps";
            }
        }
        HistoryRow row;
        row.epoch = epoch;
        row.train_metric = evaluate(model, pairs, jobs).mean_error;
        if (holdout && !holdout->empty()) row.holdout_metric = evaluate(model, *holdout, jobs).mean_error;
        if (!std::isfinite(row.train_metric)) throw Error("train: non-finite metric at epoch " + std::to_string(epoch));
        res.history.push_back(row);

        if (cfg.target_metric > 0.0 && row.train_metric < cfg.target_metric) {
            res.stop_reason = "target_metric";
            break;
        }
        if (row.train_metric < best * (1.0 - cfg.min_rel_improvement)) {
            best = row.train_metric;
            best_epoch = epoch;
        } else if (epoch - best_epoch >= cfg.patience) {
            res.stop_reason = "plateau";
            break;
        }
    }
    return res;
}

std::vector<double> segment_features(const AudioClip& segment, const StftConfig& stft_cfg, double log_floor) {
    return log_magnitude(stft(segment, stft_cfg), log_floor);
}

// Checkpoints ---------------------------------------------------------------

namespace {

constexpr int kFormatVersion = 1;

std::filesystem::path blob_path(const std::filesystem::path& header) {
    auto p = header;
    p.replace_extension(".bin");
    return p;
}

detail::json config_to_json(const RegressorConfig& c) {
    return {{"conv_channels", c.conv_channels}, {"input_bins", c.input_bins}, {"input_frames", c.input_frames},
            {"kernel", kKernel}, {"pool", kPool}, {"lr", c.lr}, {"momentum", c.momentum}, {"batch", c.batch},
            {"epochs", c.epochs}, {"seed", c.seed}};
}

void put_floats(std::vector<char>& buf, std::span<const float> v) {
    for (float f : v) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((u >> (8 * b)) & 0xffu));
    }
}

void get_floats(const std::vector<char>& buf, std::size_t& pos, std::span<float> out) {
    for (float& f : out) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + b])) << (8 * b);
        std::memcpy(&f, &u, 4);
        pos += 4;
    }
}

} // namespace

void save_model(const RegressorModel& model, const std::filesystem::path& header_path) {
    const auto& cfg = model.net.config();
    detail::json layers = detail::json::array();
    for (const auto& t : model.net.tensors()) layers.push_back({{"name", t.name}, {"shape", t.shape}});
    const auto blob = blob_path(header_path);
    detail::json h{{"format", "touchmap-regressor"},
                   {"format_version", kFormatVersion},
                   {"config", config_to_json(cfg)},
                   {"layers", layers},
                   {"n_params", model.net.params().size()},
                   {"blob", blob.filename().string()},
                   {"dtype", "float32-le"}};

    std::vector<char> buf;
    buf.reserve(4 * (model.net.params().size() + 2 * model.input_mean.size() + 4));
    put_floats(buf, model.net.params());
    put_floats(buf, model.input_mean);
    put_floats(buf, model.input_std);
    put_floats(buf, model.target_mean);
    put_floats(buf, model.target_scale);
    {
        std::ofstream out(blob, std::ios::binary);
        if (!out) throw FormatError("cannot write " + blob.string());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    std::ofstream out(header_path);
    if (!out) throw FormatError("cannot write " + header_path.string());
    out << h.dump(2) << '\n';
}

RegressorModel load_model(const std::filesystem::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw FormatError("cannot open checkpoint " + header_path.string());
    detail::json h;
    try {
        in >> h;
    } catch (const std::exception& e) {
        throw FormatError("checkpoint " + header_path.string() + ": bad JSON header: " + e.what());
    }
    const std::string where = "checkpoint " + header_path.string();
    try {
        if (h.value("format", "") != "touchmap-regressor") throw FormatError(where + ": not a regressor checkpoint");
        if (h.at("format_version").get<int>() != kFormatVersion)
            throw FormatError(where + ": unsupported format_version");
        const auto& c = h.at("config");
        if (c.at("kernel").get<int>() != kKernel || c.at("pool").get<int>() != kPool)
            throw FormatError(where + ": unsupported kernel or pool size");
        RegressorConfig cfg;
        cfg.conv_channels = c.at("conv_channels").get<std::array<int, 5>>();
        cfg.input_bins = c.at("input_bins").get<int>();
        cfg.input_frames = c.at("input_frames").get<int>();
        cfg.lr = c.at("lr").get<double>();
        cfg.momentum = c.at("momentum").get<double>();
        cfg.batch = c.at("batch").get<int>();
        cfg.epochs = c.at("epochs").get<int>();
        cfg.seed = c.at("seed").get<std::uint64_t>();
        RegressorModel model(cfg);

        const auto& layers = h.at("layers");
        const auto& tensors = model.net.tensors();
        if (!layers.is_array() || layers.size() != tensors.size())
            throw FormatError(where + ": layer list does not match the architecture");
        for (std::size_t i = 0; i < tensors.size(); ++i) {
            if (layers[i].at("name").get<std::string>() != tensors[i].name ||
                layers[i].at("shape").get<std::vector<int>>() != tensors[i].shape)
                throw FormatError(where + ": layer '" + tensors[i].name + "' shape mismatch");
        }
        const std::size_t n_params = h.at("n_params").get<std::size_t>();
        if (n_params != model.net.params().size()) throw FormatError(where + ": parameter count mismatch");

        const auto blob = header_path.parent_path() / h.at("blob").get<std::string>();
        std::ifstream bin(blob, std::ios::binary);
        if (!bin) throw FormatError(where + ": cannot open blob " + blob.string());
        std::vector<char> buf((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
        const std::size_t bins = static_cast<std::size_t>(cfg.input_bins);
        const std::size_t expected = 4 * (n_params + 2 * bins + 4);
        if (buf.size() < expected) throw FormatError(where + ": blob truncated");
        if (buf.size() > expected) throw FormatError(where + ": blob has trailing bytes");
        std::size_t pos = 0;
        get_floats(buf, pos, model.net.params());
        get_floats(buf, pos, model.input_mean);
        get_floats(buf, pos, model.input_std);
        get_floats(buf, pos, model.target_mean);
        get_floats(buf, pos, model.target_scale);
        for (float f : model.net.params())
            if (!std::isfinite(f)) throw FormatError(where + ": non-finite parameter");
        return model;
    } catch (const detail::json::exception& e) {
        throw FormatError(where + ": " + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(where + ": " + e.what());
    }
}

RegressorModel load_model(const std::filesystem::path& header_path, const RegressorConfig& expected) {
    auto model = load_model(header_path);
    if (!model.net.config().same_architecture(expected))
        throw FormatError("checkpoint " + header_path.string() + ": architecture differs from the configured one");
    return model;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "epoch,train_metric,holdout_metric\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << r.train_metric << ',';
        if (r.holdout_metric >= 0.0) out << r.holdout_metric;
        out << '\n';
    }
}

} // namespace touchmap
