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

#include "touchmap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "touchmap/error.hpp"

namespace touchmap {

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t t = 0; t < dim; ++t) {
        const double d = a[t] - b[t];
        acc += d * d;
    }
    return acc;
}

KMeansResult lloyd(std::span<const double> pts, std::size_t n, std::size_t dim, int k, std::mt19937_64& rng,
                   int max_iter) {
    const auto kk = static_cast<std::size_t>(k);
    KMeansResult r;
    r.centers.assign(kk * dim, 0.0);
    // k-means++ seeding
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::size_t c0 = first(rng);
    std::copy_n(pts.data() + c0 * dim, dim, r.centers.begin());
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < kk; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            best[i] = std::min(best[i], sq_dist(pts.data() + i * dim, r.centers.data() + (c - 1) * dim, dim));
            total += best[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> uni(0.0, total);
            double target = uni(rng);
            for (pick = 0; pick + 1 < n; ++pick) {
                target -= best[pick];
                if (target <= 0.0) break;
            }
        }
        std::copy_n(pts.data() + pick * dim, dim, r.centers.begin() + static_cast<std::ptrdiff_t>(c * dim));
    }

    r.labels.assign(n, 0);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = it == 0;
        for (std::size_t i = 0; i < n; ++i) {
            int arg = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < kk; ++c) {
                const double d = sq_dist(pts.data() + i * dim, r.centers.data() + c * dim, dim);
                if (d < bd) {
                    bd = d;
                    arg = static_cast<int>(c);
                }
            }
            if (r.labels[i] != arg) changed = true;
            r.labels[i] = arg;
        }
        std::vector<double> sums(kk * dim, 0.0);
        std::vector<std::size_t> counts(kk, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(r.labels[i]);
            ++counts[c];
            for (std::size_t t = 0; t < dim; ++t) sums[c * dim + t] += pts[i * dim + t];
        }
        for (std::size_t c = 0; c < kk; ++c)
            if (counts[c] > 0)
                for (std::size_t t = 0; t < dim; ++t) r.centers[c * dim + t] = sums[c * dim + t] / counts[c];
        if (!changed) break;
    }
    r.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        r.inertia += sq_dist(pts.data() + i * dim, r.centers.data() + static_cast<std::size_t>(r.labels[i]) * dim, dim);
    return r;
}

} // namespace

KMeansResult kmeans(std::span<const double> points, std::size_t n, std::size_t dim, int k, std::uint64_t seed,
                    int restarts, int max_iter) {
    if (k < 1 || static_cast<std::size_t>(k) > n) throw Error("kmeans: need 1 <= k <= n");
    if (points.size() != n * dim) throw Error("kmeans: point buffer does not match n x dim");
    std::mt19937_64 rng(seed);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, restarts); ++r) {
        auto res = lloyd(points, n, dim, k, rng, max_iter);
        if (res.inertia < best.inertia) best = std::move(res);
    }
    return best;
}

double cluster_purity(const std::vector<int>& clusters, const std::vector<int>& labels) {
    if (clusters.size() != labels.size() || clusters.empty()) throw Error("cluster_purity: size mismatch");
    std::map<int, std::map<int, std::size_t>> table;
    for (std::size_t i = 0; i < clusters.size(); ++i) ++table[clusters[i]][labels[i]];
    std::size_t hit = 0;
    for (const auto& [_, counts] : table) {
        std::size_t m = 0;
        for (const auto& [__, c] : counts) m = std::max(m, c);
        hit += m;
    }
    return static_cast<double>(hit) / static_cast<double>(clusters.size());
}

double MatchStats::precision() const {
    const auto d = true_positives + false_positives;
    return d == 0 ? 1.0 : static_cast<double>(true_positives) / static_cast<double>(d);
}

double MatchStats::recall() const {
    const auto d = true_positives + false_negatives;
    return d == 0 ? 1.0 : static_cast<double>(true_positives) / static_cast<double>(d);
}

MatchStats& MatchStats::operator+=(const MatchStats& o) {
    true_positives += o.true_positives;
    false_positives += o.false_positives;
    false_negatives += o.false_negatives;
    timing_errors.insert(timing_errors.end(), o.timing_errors.begin(), o.timing_errors.end());
    return *this;
}

MatchStats match_events(std::vector<double> detected, const std::vector<double>& truth, double tolerance_s) {
    std::sort(detected.begin(), detected.end());
    std::vector<bool> used(truth.size(), false);
    MatchStats s;
    for (double d : detected) {
        std::size_t best = truth.size();
        double best_err = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < truth.size(); ++t) {
            const double err = std::abs(d - truth[t]);
            if (!used[t] && err <= tolerance_s && err < best_err) {
                best = t;
                best_err = err;
            }
        }
        if (best == truth.size()) {
            ++s.false_positives;
        } else {
            used[best] = true;
            ++s.true_positives;
            s.timing_errors.push_back(d - truth[best]);
        }
    }
    s.false_negatives = static_cast<std::size_t>(std::count(used.begin(), used.end(), false));
    return s;
}

} // namespace touchmap
