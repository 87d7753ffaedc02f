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

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <limits>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

#include <Eigen/Dense>

#include "touchmap/error.hpp"
#include "touchmap/manifold.hpp"

namespace touchmap {

namespace {

constexpr std::size_t kDenseSpectralLimit = 300;

struct Csr {
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> cols;
    std::vector<double> vals;
};

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

// Component label per vertex; components numbered by decreasing size, ties by
// smallest member.
std::vector<std::size_t> connected_components(const FuzzyGraph& g, std::size_t& n_components) {
    std::vector<std::size_t> parent(g.n);
    std::iota(parent.begin(), parent.end(), 0);
    for (const auto& e : g.edges) {
        const auto a = find_root(parent, e.i), b = find_root(parent, e.j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::vector<std::size_t> root(g.n), size(g.n, 0);
    for (std::size_t v = 0; v < g.n; ++v) {
        root[v] = find_root(parent, v);
        ++size[root[v]];
    }
    std::vector<std::size_t> roots;
    for (std::size_t v = 0; v < g.n; ++v)
        if (root[v] == v) roots.push_back(v);
    std::stable_sort(roots.begin(), roots.end(), [&](std::size_t a, std::size_t b) { return size[a] > size[b]; });
    std::vector<std::size_t> rank(g.n);
    for (std::size_t r = 0; r < roots.size(); ++r) rank[roots[r]] = r;
    std::vector<std::size_t> label(g.n);
    for (std::size_t v = 0; v < g.n; ++v) label[v] = rank[root[v]];
    n_components = roots.size();
    return label;
}

// Two leading non-trivial eigenvectors of the normalised adjacency
// D^-1/2 W D^-1/2 of one component (i.e. the smallest non-trivial
// eigenvectors of the normalised Laplacian). Returns m x 2 row-major.
std::vector<double> spectral_component(const std::vector<std::size_t>& members, const FuzzyGraph& g,
                                       const std::vector<std::size_t>& local, std::mt19937_64& rng) {
    const std::size_t m = members.size();
    Csr adj;
    {
        std::vector<std::vector<std::pair<std::size_t, double>>> rows(m);
        for (const auto& e : g.edges) {
            const auto a = local[e.i], b = local[e.j];
            if (a == SIZE_MAX || b == SIZE_MAX) continue;
            rows[a].emplace_back(b, e.weight);
            rows[b].emplace_back(a, e.weight);
        }
        adj.offsets.push_back(0);
        for (auto& r : rows) {
            for (const auto& [c, w] : r) {
                adj.cols.push_back(c);
                adj.vals.push_back(w);
            }
            adj.offsets.push_back(adj.cols.size());
        }
    }
    Eigen::VectorXd inv_sqrt_deg(m), sqrt_deg(m);
    for (std::size_t r = 0; r < m; ++r) {
        double d = 0.0;
        for (std::size_t p = adj.offsets[r]; p < adj.offsets[r + 1]; ++p) d += adj.vals[p];
        sqrt_deg[r] = std::sqrt(d);
        inv_sqrt_deg[r] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
    }

    std::vector<double> out(m * 2, 0.0);
    if (m <= kDenseSpectralLimit) {
        Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t p = adj.offsets[r]; p < adj.offsets[r + 1]; ++p)
                lap(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(adj.cols[p])) -=
                    inv_sqrt_deg[r] * adj.vals[p] * inv_sqrt_deg[adj.cols[p]];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
        if (es.info() != Eigen::Success) throw Error("spectral init: eigensolver failed");
        for (std::size_t r = 0; r < m; ++r) {
            out[2 * r] = es.eigenvectors()(static_cast<Eigen::Index>(r), 1);
            out[2 * r + 1] = es.eigenvectors()(static_cast<Eigen::Index>(r), 2);
        }
        return out;
    }

    // Subspace iteration on (I + D^-1/2 W D^-1/2) / 2, deflating the trivial
    // eigenvector D^1/2 1.
    const Eigen::Index n = static_cast<Eigen::Index>(m);
    const Eigen::Index block = 6;
    const Eigen::VectorXd v0 = sqrt_deg.normalized();
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd x(n, block);
    for (Eigen::Index c = 0; c < block; ++c)
        for (Eigen::Index r = 0; r < n; ++r) x(r, c) = gauss(rng);

    auto apply = [&](const Eigen::MatrixXd& in) {
        Eigen::MatrixXd scaled = inv_sqrt_deg.asDiagonal() * in;
        Eigen::MatrixXd res = Eigen::MatrixXd::Zero(n, in.cols());
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t p = adj.offsets[r]; p < adj.offsets[r + 1]; ++p)
                res.row(static_cast<Eigen::Index>(r)) += adj.vals[p] * scaled.row(static_cast<Eigen::Index>(adj.cols[p]));
        res = inv_sqrt_deg.asDiagonal() * res;
        return Eigen::MatrixXd(0.5 * (in + res));
    };

    Eigen::VectorXd prev_ritz = Eigen::VectorXd::Zero(block);
    Eigen::MatrixXd q;
    for (int it = 0; it < 2000; ++it) {
        x -= v0 * (v0.transpose() * x);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
        q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
        x = apply(q);
        if (it % 10 == 9) {
            const Eigen::MatrixXd h = q.transpose() * x;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
            const Eigen::VectorXd ritz = es.eigenvalues();
            if ((ritz - prev_ritz).cwiseAbs().maxCoeff() < 1e-10) break;
            prev_ritz = ritz;
        }
    }
    x -= v0 * (v0.transpose() * x);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
    const Eigen::MatrixXd h = q.transpose() * apply(q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    // Eigenvalues ascend; the two largest are the leading non-trivial pair.
    const Eigen::MatrixXd vecs = q * es.eigenvectors().rightCols(2);
    for (std::size_t r = 0; r < m; ++r) {
        out[2 * r] = vecs(static_cast<Eigen::Index>(r), 1);
        out[2 * r + 1] = vecs(static_cast<Eigen::Index>(r), 0);
    }
    return out;
}

std::vector<double> random_layout(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-10.0, 10.0);
    std::vector<double> xy(2 * n);
    for (auto& v : xy) v = uni(rng);
    return xy;
}

double clip_grad(double v, double c) { return std::clamp(v, -c, c); }

struct PlainAccess {
    double* data;
    double load(std::size_t i) const { return data[i]; }
    void add(std::size_t i, double v) const { data[i] += v; }
};

// Relaxed atomics: racy-by-design Hogwild updates without undefined behaviour.
struct AtomicAccess {
    double* data;
    double load(std::size_t i) const { return std::atomic_ref<double>(data[i]).load(std::memory_order_relaxed); }
    void add(std::size_t i, double v) const {
        std::atomic_ref<double> ref(data[i]);
        ref.store(ref.load(std::memory_order_relaxed) + v, std::memory_order_relaxed);
    }
};

struct DirectedEdge {
    std::size_t head, tail;
    double epochs_per_sample;
};

struct SgdState {
    std::vector<DirectedEdge> edges;
    std::vector<double> next_sample;
    std::vector<double> next_negative;
    std::vector<double> epochs_per_negative;
};

template <typename Access>
void repel(const Access& xy, std::size_t i, std::size_t k, double a, double b, double alpha, double clip) {
    const double dx = xy.load(2 * i) - xy.load(2 * k);
    const double dy = xy.load(2 * i + 1) - xy.load(2 * k + 1);
    const double d2 = dx * dx + dy * dy;
    if (d2 <= 0.0) return;
    const double coeff = 2.0 * b / ((0.001 + d2) * (a * std::pow(d2, b) + 1.0));
    xy.add(2 * i, clip_grad(coeff * dx, clip) * alpha);
    xy.add(2 * i + 1, clip_grad(coeff * dy, clip) * alpha);
}

template <typename Access>
void sgd_edges(const Access& xy, SgdState& st, std::size_t begin, std::size_t end, std::size_t n_points, double epoch,
               double a, double b, double alpha, double clip, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, n_points - 1);
    for (std::size_t e = begin; e < end; ++e) {
        if (st.next_sample[e] > epoch) continue;
        const auto i = st.edges[e].head, j = st.edges[e].tail;
        const double dx = xy.load(2 * i) - xy.load(2 * j);
        const double dy = xy.load(2 * i + 1) - xy.load(2 * j + 1);
        const double d2 = dx * dx + dy * dy;
        if (d2 > 0.0) {
            const double coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
            const double gx = clip_grad(coeff * dx, clip), gy = clip_grad(coeff * dy, clip);
            xy.add(2 * i, gx * alpha);
            xy.add(2 * i + 1, gy * alpha);
            xy.add(2 * j, -gx * alpha);
            xy.add(2 * j + 1, -gy * alpha);
        }
        st.next_sample[e] += st.edges[e].epochs_per_sample;

        const auto n_neg = static_cast<long long>((epoch - st.next_negative[e]) / st.epochs_per_negative[e]);
        for (long long p = 0; p < n_neg; ++p) {
            const std::size_t k = pick(rng);
            if (k == i || k == j) continue;
            repel(xy, i, k, a, b, alpha, clip);
        }
        if (n_neg > 0) st.next_negative[e] += static_cast<double>(n_neg) * st.epochs_per_negative[e];
    }
}

} // namespace

std::vector<double> initial_layout(const FuzzyGraph& graph, const ManifoldConfig& cfg) {
    const std::size_t n = graph.n;
    std::mt19937_64 rng(cfg.seed);
    if (!cfg.spectral_init) return random_layout(n, rng);

    std::size_t n_comp = 0;
    const auto label = connected_components(graph, n_comp);
    std::vector<std::vector<std::size_t>> members(n_comp);
    for (std::size_t v = 0; v < n; ++v) members[label[v]].push_back(v);

    // Component anchors: +-x, +-y for up to four components, a circle beyond.
    std::vector<std::array<double, 2>> anchor(n_comp);
    const std::array<std::array<double, 2>, 4> axes{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    double radius = 1.0;
    if (n_comp == 1) {
        anchor[0] = {0.0, 0.0};
    } else if (n_comp <= 4) {
        for (std::size_t c = 0; c < n_comp; ++c) anchor[c] = axes[c];
        radius = std::sqrt(2.0) / 2.0;
    } else {
        for (std::size_t c = 0; c < n_comp; ++c) {
            const double t = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(n_comp);
            anchor[c] = {std::cos(t), std::sin(t)};
        }
        radius = std::sin(std::numbers::pi / static_cast<double>(n_comp));
    }

    std::vector<double> xy(2 * n, 0.0);
    std::vector<bool> isolated(n, false);
    std::vector<std::size_t> local(n, SIZE_MAX);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    bool any_connected = false;
    for (std::size_t c = 0; c < n_comp; ++c) {
        const auto& mem = members[c];
        if (mem.size() == 1) {
            isolated[mem[0]] = true;
            continue;
        }
        any_connected = true;
        std::vector<double> part;
        if (mem.size() >= 3) {
            for (std::size_t r = 0; r < mem.size(); ++r) local[mem[r]] = r;
            part = spectral_component(mem, graph, local, rng);
            for (auto v : mem) local[v] = SIZE_MAX;
        } else {
            part.resize(2 * mem.size());
            for (auto& v : part) v = jitter(rng);
        }
        double max_abs = 0.0;
        for (double v : part) max_abs = std::max(max_abs, std::abs(v));
        const double scale = max_abs > 0.0 ? radius / max_abs : 0.0;
        for (std::size_t r = 0; r < mem.size(); ++r) {
            xy[2 * mem[r]] = anchor[c][0] + part[2 * r] * scale;
            xy[2 * mem[r] + 1] = anchor[c][1] + part[2 * r + 1] * scale;
        }
    }
    if (!any_connected) return random_layout(n, rng);

    // Rescale connected points to [0, 10]^2 per axis; isolated points are
    // dropped uniformly into the same box.
    for (int axis = 0; axis < 2; ++axis) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t v = 0; v < n; ++v) {
            if (isolated[v]) continue;
            lo = std::min(lo, xy[2 * v + axis]);
            hi = std::max(hi, xy[2 * v + axis]);
        }
        const double range = hi - lo;
        for (std::size_t v = 0; v < n; ++v) {
            if (isolated[v]) continue;
            xy[2 * v + axis] = range > 0.0 ? 10.0 * (xy[2 * v + axis] - lo) / range : 5.0;
        }
    }
    std::normal_distribution<double> noise(0.0, 1e-4);
    std::uniform_real_distribution<double> box(0.0, 10.0);
    for (std::size_t v = 0; v < n; ++v) {
        if (isolated[v]) {
            xy[2 * v] = box(rng);
            xy[2 * v + 1] = box(rng);
        } else {
            xy[2 * v] += noise(rng);
            xy[2 * v + 1] += noise(rng);
        }
    }
    return xy;
}

ManifoldCoords optimize_layout(const FuzzyGraph& graph, const ManifoldConfig& cfg, const std::vector<double>* init) {
    cfg.validate();
    const std::size_t n = graph.n;
    ManifoldCoords out;
    out.xy = init ? *init : initial_layout(graph, cfg);
    if (out.xy.size() != 2 * n) throw Error("optimize_layout: initial layout has wrong size");
    if (n < 2) return out;

    const auto [a, b] = fit_ab(cfg.min_dist, cfg.spread);
    const double epochs = cfg.n_epochs;

    double max_w = 0.0;
    for (const auto& e : graph.edges) max_w = std::max(max_w, e.weight);
    SgdState st;
    std::vector<bool> has_edge(n, false);
    for (const auto& e : graph.edges) {
        // Edges too weak to be sampled even once are dropped.
        if (e.weight < max_w / epochs) continue;
        const double eps = max_w / e.weight;
        st.edges.push_back({e.i, e.j, eps});
        st.edges.push_back({e.j, e.i, eps});
        has_edge[e.i] = has_edge[e.j] = true;
    }
    std::stable_sort(st.edges.begin(), st.edges.end(), [](const DirectedEdge& x, const DirectedEdge& y) {
        return x.head != y.head ? x.head < y.head : x.tail < y.tail;
    });
    const double neg = std::max(cfg.negative_samples, 0);
    for (const auto& e : st.edges) {
        st.next_sample.push_back(e.epochs_per_sample);
        const double epn = neg > 0.0 ? e.epochs_per_sample / neg : std::numeric_limits<double>::infinity();
        st.epochs_per_negative.push_back(epn);
        st.next_negative.push_back(epn);
    }
    std::vector<std::size_t> isolated;
    for (std::size_t v = 0; v < n; ++v)
        if (!has_edge[v]) isolated.push_back(v);

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const PlainAccess plain{out.xy.data()};
    const int workers = cfg.deterministic ? 1 : std::max(1, cfg.jobs);

    for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
        const double alpha = cfg.learning_rate * (1.0 - epoch / epochs);
        const double now = epoch + 1.0;
        if (workers == 1) {
            sgd_edges(plain, st, 0, st.edges.size(), n, now, a, b, alpha, cfg.gradient_clip, rng);
        } else {
            const AtomicAccess atomic{out.xy.data()};
            std::vector<std::thread> pool;
            const std::size_t chunk = (st.edges.size() + workers - 1) / static_cast<std::size_t>(workers);
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    std::mt19937_64 local_rng(cfg.seed + 1000003ULL * static_cast<std::uint64_t>(epoch) +
                                              static_cast<std::uint64_t>(w));
                    const std::size_t lo = std::min(st.edges.size(), chunk * static_cast<std::size_t>(w));
                    const std::size_t hi = std::min(st.edges.size(), lo + chunk);
                    sgd_edges(atomic, st, lo, hi, n, now, a, b, alpha, cfg.gradient_clip, local_rng);
                });
            }
            for (auto& t : pool) t.join();
        }
        for (const auto v : isolated) {
            for (int p = 0; p < cfg.negative_samples; ++p) {
                const std::size_t k = pick(rng);
                if (k != v) repel(plain, v, k, a, b, alpha, cfg.gradient_clip);
            }
        }
    }
    return out;
}

ManifoldCoords embed(const EmbeddingMatrix& emb, const ManifoldConfig& cfg) {
    cfg.validate();
    if (emb.n < static_cast<std::size_t>(cfg.n_neighbors) + 1)
        throw ConfigError("manifold: need at least n_neighbors + 1 = " + std::to_string(cfg.n_neighbors + 1) +
                          " points, got " + std::to_string(emb.n));
    const auto knn = knn_graph(emb, static_cast<std::size_t>(cfg.n_neighbors), cfg.jobs);
    const auto graph = fuzzy_graph(knn, smooth_knn(knn));
    auto coords = optimize_layout(graph, cfg);
    coords.ids = emb.ids;
    return coords;
}

} // namespace touchmap
