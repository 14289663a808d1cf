#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "crlsc/kmeans.hpp"
#include "crlsc/matrix.hpp"

namespace crlsc {

enum class Metric : std::uint8_t { L2 = 0, Cosine = 1 };

struct PQConfig {
    std::size_t d = 0;       // full embedding dimension
    std::size_t m = 0;       // number of subspaces
    std::size_t k_star = 0;  // centroids per subspace
    std::size_t kmeans_iters = 25;
    std::uint64_t seed = 0;
    Metric metric = Metric::L2;

    std::size_t d_sub() const { return d / m; }

    void validate() const {
        if (d == 0 || m == 0) throw ValidationError("PQConfig: d and m must be positive");
        if (d % m != 0) throw ValidationError("PQConfig: d must be divisible by m");
        if (k_star < 2 || k_star > 65536)
            throw ValidationError("PQConfig: k* must be in [2, 65536]");
    }
};

// m sub-codebooks of k* x d* centroids. Centroids are f32, matching the
// on-disk and wire representation, so persistence roundtrips bit-exactly.
struct PQCodebook {
    PQConfig config;
    std::vector<std::vector<float>> centroids;  // m entries, each k* x d* row-major

    const float* centroid(std::size_t subspace, std::size_t idx) const {
        return centroids[subspace].data() + idx * config.d_sub();
    }
    // Total scalars stored: m * d* * k*.
    std::size_t storage_scalars() const { return config.m * config.d_sub() * config.k_star; }
};

struct PQCode {
    std::vector<std::uint32_t> indices;  // length m, each < k*
};

inline double squared_l2_df(const double* a, const float* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - static_cast<double>(b[i]);
        s += d * d;
    }
    return s;
}

// Train per-subspace codebooks: independent k-means on each column slice.
// Subspace j uses seed + j so runs are reproducible and subspaces decoupled.
inline PQCodebook pq_train(const Matrix& vectors, const PQConfig& config) {
    config.validate();
    if (vectors.cols() != config.d) throw ValidationError("pq_train: dimension mismatch");
    if (vectors.rows() < 1) throw ValidationError("pq_train: need at least one vector");
    if (!vectors.all_finite()) throw ValidationError("pq_train: non-finite input");

    const std::size_t ds = config.d_sub();
    PQCodebook cb;
    cb.config = config;
    cb.centroids.resize(config.m);

    for (std::size_t j = 0; j < config.m; ++j) {
        Matrix sub(vectors.rows(), ds);
        for (std::size_t i = 0; i < vectors.rows(); ++i)
            for (std::size_t c = 0; c < ds; ++c) sub(i, c) = vectors(i, j * ds + c);

        KmeansResult km = kmeans_fit(sub, config.k_star, config.kmeans_iters,
                                     config.seed + j);
        cb.centroids[j].resize(config.k_star * ds);
        for (std::size_t k = 0; k < config.k_star; ++k)
            for (std::size_t c = 0; c < ds; ++c)
                cb.centroids[j][k * ds + c] = static_cast<float>(km.centroids(k, c));
    }
    return cb;
}

// Per subspace, pick the centroid minimizing squared L2; ties go to the
// lowest index.
inline PQCode pq_encode(const std::vector<double>& v, const PQCodebook& cb) {
    const PQConfig& cfg = cb.config;
    if (v.size() != cfg.d) throw ValidationError("pq_encode: vector length mismatch");
    for (double x : v)
        if (!std::isfinite(x)) throw ValidationError("pq_encode: non-finite input");

    const std::size_t ds = cfg.d_sub();
    PQCode code;
    code.indices.resize(cfg.m);
    for (std::size_t j = 0; j < cfg.m; ++j) {
        const double* q = v.data() + j * ds;
        std::uint32_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < cfg.k_star; ++k) {
            const double d = squared_l2_df(q, cb.centroid(j, k), ds);
            if (d < best_d) {
                best_d = d;
                best = static_cast<std::uint32_t>(k);
            }
        }
        code.indices[j] = best;
    }
    return code;
}

// Concatenation of the selected centroids. Returns f32 values, the exact
// representation stored in the codebook (and shipped over the wire).
inline std::vector<float> pq_decode(const PQCode& code, const PQCodebook& cb) {
    const PQConfig& cfg = cb.config;
    if (code.indices.size() != cfg.m) throw ValidationError("pq_decode: code length mismatch");
    const std::size_t ds = cfg.d_sub();
    std::vector<float> out(cfg.d);
    for (std::size_t j = 0; j < cfg.m; ++j) {
        if (code.indices[j] >= cfg.k_star)
            throw ValidationError("pq_decode: index out of range");
        const float* c = cb.centroid(j, code.indices[j]);
        for (std::size_t t = 0; t < ds; ++t) out[j * ds + t] = c[t];
    }
    return out;
}

inline std::vector<double> to_double(const std::vector<float>& v) {
    return {v.begin(), v.end()};
}

}  // namespace crlsc
