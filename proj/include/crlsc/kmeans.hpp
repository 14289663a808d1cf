#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "crlsc/matrix.hpp"

namespace crlsc {

struct KmeansResult {
    Matrix centroids;                  // k x dim
    std::vector<std::size_t> assign;   // per-point nearest centroid
    std::vector<double> objective;     // sum of squared distances, per iteration
};

namespace detail {

inline std::size_t nearest_centroid(const double* p, const Matrix& centroids,
                                    double* out_dist = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = squared_l2(p, centroids.row(c), centroids.cols());
        if (d < best_d) {  // ties: lowest index wins
            best_d = d;
            best = c;
        }
    }
    if (out_dist) *out_dist = best_d;
    return best;
}

// k-means++ seeding: first center uniform, then D^2-weighted draws.
inline Matrix kmeanspp_init(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows();
    const std::size_t dim = points.cols();
    Matrix centers(k, dim);

    std::uniform_int_distribution<std::size_t> uni(0, n - 1);
    std::size_t first = uni(rng);
    centers.set_row(0, points.row_vec(first));

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i)
        d2[i] = squared_l2(points.row(i), centers.row(0), dim);

    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick;
        if (total <= 0.0) {
            pick = uni(rng);
        } else {
            std::uniform_real_distribution<double> ud(0.0, total);
            double target = ud(rng);
            pick = n - 1;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        centers.set_row(c, points.row_vec(pick));
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_l2(points.row(i), centers.row(c), dim));
    }
    return centers;
}

}  // namespace detail

// Lloyd iterations with k-means++ init. Empty clusters are refilled with the
// point currently farthest from its assigned centroid. Deterministic per seed.
inline KmeansResult kmeans_fit(const Matrix& points, std::size_t k_star,
                               std::size_t iters, std::uint64_t seed) {
    const std::size_t n = points.rows();
    const std::size_t dim = points.cols();
    if (n < 1 || k_star < 1) throw ValidationError("kmeans_fit: need N >= 1 and k* >= 1");
    if (!points.all_finite()) throw ValidationError("kmeans_fit: non-finite input");

    Rng rng(seed);
    KmeansResult res;
    res.centroids = detail::kmeanspp_init(points, k_star, rng);
    res.assign.assign(n, 0);

    std::vector<double> dist(n, 0.0);
    std::vector<std::size_t> counts(k_star, 0);

    for (std::size_t it = 0; it < iters; ++it) {
        // Assignment step.
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t c = detail::nearest_centroid(points.row(i), res.centroids, &dist[i]);
            if (c != res.assign[i]) changed = true;
            res.assign[i] = c;
        }

        // Update step.
        Matrix sums(k_star, dim);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            counts[res.assign[i]]++;
            for (std::size_t d = 0; d < dim; ++d) sums(res.assign[i], d) += points(i, d);
        }
        for (std::size_t c = 0; c < k_star; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d)
                res.centroids(c, d) = sums(c, d) / static_cast<double>(counts[c]);
        }

        // Refresh assignments/distances against the new centroids.
        for (std::size_t i = 0; i < n; ++i)
            res.assign[i] = detail::nearest_centroid(points.row(i), res.centroids, &dist[i]);

        // Empty-cluster fix: seize the farthest point as a new centroid.
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) counts[res.assign[i]]++;
        for (std::size_t c = 0; c < k_star; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far_i = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[res.assign[i]] > 1 && dist[i] > far_d) {
                    far_d = dist[i];
                    far_i = i;
                }
            }
            counts[res.assign[far_i]]--;
            res.centroids.set_row(c, points.row_vec(far_i));
            res.assign[far_i] = c;
            counts[c] = 1;
            dist[far_i] = 0.0;
        }

        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            res.assign[i] = detail::nearest_centroid(points.row(i), res.centroids, &dist[i]);
            obj += dist[i];
        }
        res.objective.push_back(obj);

        if (!changed && it > 0) break;
    }

    if (res.objective.empty()) {
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            res.assign[i] = detail::nearest_centroid(points.row(i), res.centroids, &dist[i]);
            obj += dist[i];
        }
        res.objective.push_back(obj);
    }
    return res;
}

}  // namespace crlsc
