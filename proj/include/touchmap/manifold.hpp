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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace touchmap {

/// N row vectors of dimension D (image latent codes) with their identifiers.
struct EmbeddingMatrix {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> data;  // row-major n x d
    std::vector<std::string> ids;

    std::span<const double> row(std::size_t i) const { return {data.data() + i * d, d}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * d, d}; }
};

struct ManifoldConfig {
    int n_neighbors = 15;
    double min_dist = 0.1;
    double spread = 1.0;
    int n_epochs = 200;
    int negative_samples = 5;
    double learning_rate = 1.0;
    double gradient_clip = 4.0;
    bool spectral_init = true;
    // false: lock-free multi-threaded edge updates (not reproducible)
    bool deterministic = true;
    int jobs = 1;
    std::uint64_t seed = 42;

    void validate() const;
};

/// N x 2 layout aligned with the embedding rows.
struct ManifoldCoords {
    std::vector<double> xy;  // row-major n x 2
    std::vector<std::string> ids;

    std::size_t size() const { return xy.size() / 2; }
    double x(std::size_t i) const { return xy[2 * i]; }
    double y(std::size_t i) const { return xy[2 * i + 1]; }
};

struct KnnGraph {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::size_t> indices;  // n x k
    std::vector<double> distances;     // n x k, ascending per row

    std::span<const std::size_t> neighbors(std::size_t i) const { return {indices.data() + i * k, k}; }
    std::span<const double> dists(std::size_t i) const { return {distances.data() + i * k, k}; }
};

struct SmoothKnn {
    double rho = 0.0;
    double sigma = 1.0;
};

struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;
    double weight = 0.0;
};

/// Symmetric fuzzy graph as an undirected edge list (i < j).
struct FuzzyGraph {
    std::size_t n = 0;
    std::vector<Edge> edges;
};

struct CurveParams {
    double a = 0.0;
    double b = 0.0;
};

/// Exact brute-force kNN, self excluded, ties broken by lower index.
KnnGraph knn_graph(const EmbeddingMatrix& emb, std::size_t k, int jobs = 1);

/// Same, over an arbitrary row-major point set of the given dimension.
KnnGraph knn_graph(std::span<const double> points, std::size_t n, std::size_t dim, std::size_t k, int jobs = 1);

/// Per-point (rho, sigma): rho is the nearest-neighbour distance, sigma is
/// found by bisection so that sum_j exp(-max(0, d_j - rho) / sigma) = log2(k).
std::vector<SmoothKnn> smooth_knn(const KnnGraph& knn);
SmoothKnn smooth_knn_row(std::span<const double> sorted_dists);

/// Membership sum that the bisection drives towards log2(k).
double membership_sum(std::span<const double> sorted_dists, const SmoothKnn& s);

/// a_ij = exp(-max(0, d_ij - rho_i) / sigma_i), symmetrised as a + a^T - a.*a^T.
FuzzyGraph fuzzy_graph(const KnnGraph& knn, const std::vector<SmoothKnn>& smooth);

/// Least-squares fit of 1 / (1 + a d^{2b}) to the offset-exponential target.
CurveParams fit_ab(double min_dist, double spread);

/// RMS residual of a curve over the fit grid.
double fit_ab_residual(const CurveParams& p, double min_dist, double spread);

/// Stochastic layout optimisation of the fuzzy graph in two dimensions.
/// `init` (n x 2), when given, replaces the spectral/random initialisation.
ManifoldCoords optimize_layout(const FuzzyGraph& graph, const ManifoldConfig& cfg,
                               const std::vector<double>* init = nullptr);

/// Initial layout: scaled spectral embedding per connected component,
/// seeded uniform [-10, 10]^2 for isolated vertices and tiny components.
std::vector<double> initial_layout(const FuzzyGraph& graph, const ManifoldConfig& cfg);

/// Full pipeline: kNN -> smooth_knn -> fuzzy graph -> layout.
ManifoldCoords embed(const EmbeddingMatrix& emb, const ManifoldConfig& cfg = {});

/// Mean over points of |kNN_high(i) ∩ kNN_low(i)| / k.
double neighborhood_preservation(const EmbeddingMatrix& high, const ManifoldCoords& low, std::size_t k);

// I/O ------------------------------------------------------------------

/// CSV with header `id,v0,...,v{D-1}`.
EmbeddingMatrix read_embedding_csv(const std::filesystem::path& path);
void write_embedding_csv(const std::filesystem::path& path, const EmbeddingMatrix& emb);

/// Raw little-endian float32 row-major blob plus a JSON sidecar {n, d, ids}.
/// The sidecar sits next to the blob with extension `.json`.
EmbeddingMatrix read_embedding_bin(const std::filesystem::path& path);
void write_embedding_bin(const std::filesystem::path& path, const EmbeddingMatrix& emb);
std::filesystem::path embedding_sidecar_path(const std::filesystem::path& blob);

/// Dispatches on extension: `.csv` or anything else as binary.
EmbeddingMatrix read_embedding(const std::filesystem::path& path);

/// CSV `id,x,y`.
void write_coords_csv(const std::filesystem::path& path, const ManifoldCoords& coords);
ManifoldCoords read_coords_csv(const std::filesystem::path& path);

} // namespace touchmap
