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
#include <cstdint>
#include <span>
#include <vector>

namespace touchmap {

struct KMeansResult {
    std::vector<int> labels;
    std::vector<double> centers;  // k x dim
    double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` runs.
KMeansResult kmeans(std::span<const double> points, std::size_t n, std::size_t dim, int k, std::uint64_t seed,
                    int restarts = 10, int max_iter = 300);

/// Fraction of points whose cluster's majority label equals their own.
double cluster_purity(const std::vector<int>& clusters, const std::vector<int>& labels);

struct MatchStats {
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    std::vector<double> timing_errors;  // detected - truth, matched pairs only

    double precision() const;
    double recall() const;
    MatchStats& operator+=(const MatchStats& o);
};

/// One-to-one greedy matching of detected to reference times within ±tolerance.
MatchStats match_events(std::vector<double> detected, const std::vector<double>& truth, double tolerance_s);

} // namespace touchmap
