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
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include <Eigen/Core>
#include <unsupported/Eigen/NonLinearOptimization>

#include "touchmap/error.hpp"
#include "touchmap/manifold.hpp"
#include "touchmap/util.hpp"

namespace touchmap {

void ManifoldConfig::validate() const {
    if (n_neighbors < 2) throw ConfigError("manifold.n_neighbors must be >= 2");
    if (!(min_dist >= 0.0)) throw ConfigError("manifold.min_dist must be >= 0");
    if (!(spread > 0.0)) throw ConfigError("manifold.spread must be > 0");
    if (!(min_dist < spread)) throw ConfigError("manifold.min_dist must be < spread");
    if (n_epochs < 1) throw ConfigError("manifold.n_epochs must be >= 1");
    if (negative_samples < 0) throw ConfigError("manifold.negative_samples must be >= 0");
    if (!(learning_rate >= 0.0)) throw ConfigError("manifold.learning_rate must be >= 0");
    if (!(gradient_clip > 0.0)) throw ConfigError("manifold.gradient_clip must be > 0");
    if (jobs < 1) throw ConfigError("manifold.jobs must be >= 1");
}

KnnGraph knn_graph(std::span<const double> points, std::size_t n, std::size_t dim, std::size_t k, int jobs) {
    if (points.size() != n * dim) throw Error("knn_graph: point buffer does not match n x dim");
    if (k >= n)
        throw ConfigError("knn_graph: k (" + std::to_string(k) + ") must be < number of points (" +
                          std::to_string(n) + ")");
    KnnGraph g;
    g.n = n;
    g.k = k;
    g.indices.resize(n * k);
    g.distances.resize(n * k);
    parallel_for(n, jobs, [&](std::size_t i) {
        std::vector<std::pair<double, std::size_t>> cand;
        cand.reserve(n - 1);
        const double* pi = points.data() + i * dim;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double* pj = points.data() + j * dim;
            double acc = 0.0;
            for (std::size_t t = 0; t < dim; ++t) {
                const double diff = pi[t] - pj[t];
                acc += diff * diff;
            }
            cand.emplace_back(acc, j);
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        for (std::size_t t = 0; t < k; ++t) {
            g.indices[i * k + t] = cand[t].second;
            g.distances[i * k + t] = std::sqrt(cand[t].first);
        }
    });
    return g;
}

KnnGraph knn_graph(const EmbeddingMatrix& emb, std::size_t k, int jobs) {
    return knn_graph(emb.data, emb.n, emb.d, k, jobs);
}

double membership_sum(std::span<const double> d, const SmoothKnn& s) {
    double acc = 0.0;
    for (double v : d) acc += std::exp(-std::max(0.0, v - s.rho) / s.sigma);
    return acc;
}

SmoothKnn smooth_knn_row(std::span<const double> d) {
    if (d.size() < 2) throw ConfigError("smooth_knn: need k >= 2 neighbours");
    const double target = std::log2(static_cast<double>(d.size()));
    SmoothKnn s;
    s.rho = d.front();
    if (d.back() == d.front()) {
        s.sigma = 1.0;
        return s;
    }
    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
    for (int it = 0; it < 64; ++it) {
        const double psum = membership_sum(d, {s.rho, mid});
        if (std::abs(psum - target) < 1e-5) break;
        if (psum > target) {
            hi = mid;
            mid = 0.5 * (lo + hi);
        } else {
            lo = mid;
            mid = std::isinf(hi) ? mid * 2.0 : 0.5 * (lo + hi);
        }
    }
    s.sigma = mid;
    return s;
}

std::vector<SmoothKnn> smooth_knn(const KnnGraph& knn) {
    std::vector<SmoothKnn> out(knn.n);
    for (std::size_t i = 0; i < knn.n; ++i) out[i] = smooth_knn_row(knn.dists(i));
    return out;
}

FuzzyGraph fuzzy_graph(const KnnGraph& knn, const std::vector<SmoothKnn>& sm) {
    if (sm.size() != knn.n) throw Error("fuzzy_graph: smooth_knn size does not match graph");
    // (lo, hi, forward?, membership)
    std::vector<std::tuple<std::size_t, std::size_t, bool, double>> directed;
    directed.reserve(knn.n * knn.k);
    for (std::size_t i = 0; i < knn.n; ++i) {
        const auto nb = knn.neighbors(i);
        const auto ds = knn.dists(i);
        for (std::size_t t = 0; t < knn.k; ++t) {
            const std::size_t j = nb[t];
            const double a = std::exp(-std::max(0.0, ds[t] - sm[i].rho) / sm[i].sigma);
            directed.emplace_back(std::min(i, j), std::max(i, j), i < j, a);
        }
    }
    std::sort(directed.begin(), directed.end());
    FuzzyGraph g;
    g.n = knn.n;
    for (std::size_t p = 0; p < directed.size();) {
        const auto lo = std::get<0>(directed[p]);
        const auto hi = std::get<1>(directed[p]);
        double fwd = 0.0, bwd = 0.0;
        while (p < directed.size() && std::get<0>(directed[p]) == lo && std::get<1>(directed[p]) == hi) {
            (std::get<2>(directed[p]) ? fwd : bwd) = std::get<3>(directed[p]);
            ++p;
        }
        const double w = fwd + bwd - fwd * bwd;
        if (w > 0.0) g.edges.push_back({lo, hi, w});
    }
    return g;
}

namespace {

struct FitGrid {
    std::vector<double> x, y;
};

FitGrid make_fit_grid(double min_dist, double spread) {
    FitGrid g;
    const int m = 300;
    g.x.resize(m);
    g.y.resize(m);
    for (int i = 0; i < m; ++i) {
        const double x = 3.0 * spread * i / (m - 1);
        g.x[i] = x;
        g.y[i] = x <= min_dist ? 1.0 : std::exp(-(x - min_dist) / spread);
    }
    return g;
}

double fit_cost(const FitGrid& g, double a, double b) {
    double c = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) {
        const double r = 1.0 / (1.0 + a * std::pow(g.x[i], 2.0 * b)) - g.y[i];
        c += r * r;
    }
    return c;
}

// Residuals 1 / (1 + a x^2b) - y with their analytic Jacobian.
struct CurveFitFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const FitGrid* g;
    int inputs() const { return 2; }
    int values() const { return static_cast<int>(g->x.size()); }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
        for (std::size_t i = 0; i < g->x.size(); ++i) {
            const double x = g->x[i];
            const double u = x > 0.0 ? std::pow(x, 2.0 * p(1)) : 0.0;
            r(static_cast<Eigen::Index>(i)) = 1.0 / (1.0 + p(0) * u) - g->y[i];
        }
        return 0;
    }

    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& J) const {
        for (std::size_t i = 0; i < g->x.size(); ++i) {
            const double x = g->x[i];
            const auto row = static_cast<Eigen::Index>(i);
            const double u = x > 0.0 ? std::pow(x, 2.0 * p(1)) : 0.0;
            const double den = (1.0 + p(0) * u) * (1.0 + p(0) * u);
            J(row, 0) = -u / den;
            J(row, 1) = x > 0.0 ? -p(0) * u * 2.0 * std::log(x) / den : 0.0;
        }
        return 0;
    }
};

} // namespace

CurveParams fit_ab(double min_dist, double spread) {
    if (!(min_dist >= 0.0 && min_dist < spread)) throw ConfigError("fit_ab: need 0 <= min_dist < spread");
    const auto g = make_fit_grid(min_dist, spread);
    CurveFitFunctor f{&g};
    Eigen::VectorXd p(2);
    p << 1.0, 1.0;
    Eigen::LevenbergMarquardt<CurveFitFunctor> lm(f);
    lm.parameters.xtol = 1e-12;
    lm.parameters.ftol = 1e-14;
    lm.parameters.maxfev = 2000;
    lm.minimize(p);
    return {p(0), p(1)};
}

double fit_ab_residual(const CurveParams& p, double min_dist, double spread) {
    const auto g = make_fit_grid(min_dist, spread);
    return std::sqrt(fit_cost(g, p.a, p.b) / static_cast<double>(g.x.size()));
}

double neighborhood_preservation(const EmbeddingMatrix& high, const ManifoldCoords& low, std::size_t k) {
    if (high.n != low.size()) throw Error("neighborhood_preservation: point counts differ");
    const auto hk = knn_graph(high, k);
    const auto lk = knn_graph(low.xy, low.size(), 2, k);
    double total = 0.0;
    std::vector<std::size_t> a(k), b(k);
    for (std::size_t i = 0; i < high.n; ++i) {
        const auto hn = hk.neighbors(i);
        const auto ln = lk.neighbors(i);
        std::copy(hn.begin(), hn.end(), a.begin());
        std::copy(ln.begin(), ln.end(), b.begin());
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        std::vector<std::size_t> common;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
        total += static_cast<double>(common.size()) / static_cast<double>(k);
    }
    return total / static_cast<double>(high.n);
}

} // namespace touchmap
