#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "crlsc/knowledge_base.hpp"
#include "crlsc/matrix.hpp"

namespace crlsc {

struct NoiseConfig {
    double mean = 0.0;
    double variance = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        if (variance < 0.0) throw ValidationError("NoiseConfig: variance must be >= 0");
    }
};

enum class FusionMode { Literal, Softmax };

// Decoded top-n neighbors per query row. Shapes are rectangular: when the
// store holds fewer than n entries, the last neighbor is repeated.
struct RetrievedSet {
    std::vector<Matrix> vectors;                    // B entries of n x d
    std::vector<std::vector<std::uint64_t>> ids;    // B x n
};

// q + eps, eps ~ iid N(mean, variance). The input is untouched.
inline Matrix perturb_query(const Matrix& q, const NoiseConfig& noise) {
    noise.validate();
    Matrix out = q;
    if (noise.variance == 0.0 && noise.mean == 0.0) return out;
    Rng rng(noise.seed);
    std::normal_distribution<double> dist(noise.mean, std::sqrt(noise.variance));
    for (double& x : out.data()) x += dist(rng);
    return out;
}

// score[b][i] = (q_b . k_{b,i}) / sqrt(d). No softmax here; callers choose
// the weighting mode in fuse().
inline Matrix attention_score(const Matrix& q, const RetrievedSet& retrieved) {
    if (retrieved.vectors.size() != q.rows())
        throw ValidationError("attention_score: batch size mismatch");
    if (q.rows() == 0) throw ValidationError("attention_score: empty batch");
    const std::size_t n = retrieved.vectors[0].rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));

    Matrix scores(q.rows(), n);
    for (std::size_t b = 0; b < q.rows(); ++b) {
        const Matrix& k = retrieved.vectors[b];
        if (k.cols() != q.cols())
            throw ValidationError("attention_score: key dimension mismatch");
        if (k.rows() != n)
            throw ValidationError("attention_score: ragged neighbor count");
        for (std::size_t i = 0; i < n; ++i)
            scores(b, i) = dot(q.row(b), k.row(i), q.cols()) * scale;
    }
    return scores;
}

inline std::vector<double> softmax(const double* s, std::size_t n) {
    double mx = s[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, s[i]);
    std::vector<double> w(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(s[i] - mx);
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    return w;
}

// q*[b] = sum_i weight[b][i] * v[b][i]; weights are the raw scores in
// Literal mode, softmax rows in Softmax mode.
inline Matrix fuse(const Matrix& scores, const RetrievedSet& retrieved, FusionMode mode) {
    if (retrieved.vectors.size() != scores.rows())
        throw ValidationError("fuse: batch size mismatch");
    if (scores.rows() == 0) throw ValidationError("fuse: empty batch");
    const std::size_t n = scores.cols();
    const std::size_t d = retrieved.vectors[0].cols();

    Matrix out(scores.rows(), d);
    for (std::size_t b = 0; b < scores.rows(); ++b) {
        const Matrix& v = retrieved.vectors[b];
        if (v.rows() != n) throw ValidationError("fuse: neighbor count mismatch");
        std::vector<double> w;
        if (mode == FusionMode::Softmax)
            w = softmax(scores.row(b), n);
        else
            w.assign(scores.row(b), scores.row(b) + n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) out(b, c) += w[i] * v(i, c);
    }
    return out;
}

// Abstraction over where the top-n lookup happens (in-process KB or a
// served one). Must return hits sorted by (dist, id).
using QueryFn =
    std::function<std::vector<SearchHit>(const std::vector<double>&, std::size_t)>;

inline QueryFn local_query_fn(const KnowledgeBase& kb) {
    return [&kb](const std::vector<double>& q, std::size_t n) {
        return adc_search(q, kb, n);
    };
}

struct FusionResult {
    Matrix q_star;        // B x d
    Matrix scores;        // B x n
    RetrievedSet retrieved;
};

// Queries travel as f32 on the wire; quantize the perturbed query the same
// way here so the local and remote paths see identical retrievals.
inline std::vector<double> round_to_f32(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = static_cast<double>(static_cast<float>(v[i]));
    return out;
}

// perturb -> retrieve -> score -> fuse. Scoring uses the unperturbed q;
// the perturbed copy only drives retrieval (score_with_perturbed flips
// that for ablations). retrieval_q, when given, replaces q for the lookup
// step only; callers use it to search with an unnormalized embedding whose
// norm keeps the perturbation proportionate.
inline FusionResult retrieve_and_fuse(const Matrix& q, const QueryFn& query, std::size_t n,
                                      const NoiseConfig& noise, FusionMode mode,
                                      bool score_with_perturbed = false,
                                      const Matrix* retrieval_q = nullptr) {
    if (n < 1) throw ValidationError("retrieve_and_fuse: n must be >= 1");
    if (retrieval_q && !retrieval_q->same_shape(q))
        throw ValidationError("retrieve_and_fuse: retrieval query shape mismatch");
    Matrix q_tilde = perturb_query(retrieval_q ? *retrieval_q : q, noise);

    FusionResult res;
    res.retrieved.vectors.reserve(q.rows());
    res.retrieved.ids.reserve(q.rows());
    const std::size_t d = q.cols();

    for (std::size_t b = 0; b < q.rows(); ++b) {
        auto hits = query(round_to_f32(q_tilde.row_vec(b)), n);
        if (hits.empty()) throw ValidationError("retrieve_and_fuse: no results");
        Matrix v(n, d);
        std::vector<std::uint64_t> ids(n);
        for (std::size_t i = 0; i < n; ++i) {
            const SearchHit& h = hits[std::min(i, hits.size() - 1)];  // pad with last
            if (h.vec.size() != d)
                throw ValidationError("retrieve_and_fuse: KB dimension mismatch");
            for (std::size_t c = 0; c < d; ++c) v(i, c) = static_cast<double>(h.vec[c]);
            ids[i] = h.id;
        }
        res.retrieved.vectors.push_back(std::move(v));
        res.retrieved.ids.push_back(std::move(ids));
    }

    res.scores = attention_score(score_with_perturbed ? q_tilde : q, res.retrieved);
    res.q_star = fuse(res.scores, res.retrieved, mode);
    return res;
}

inline FusionResult retrieve_and_fuse(const Matrix& q, const KnowledgeBase& kb, std::size_t n,
                                      const NoiseConfig& noise, FusionMode mode,
                                      bool score_with_perturbed = false) {
    if (kb.codebook.config.d != q.cols())
        throw ValidationError("retrieve_and_fuse: KB dimension mismatch");
    return retrieve_and_fuse(q, local_query_fn(kb), n, noise, mode, score_with_perturbed);
}

}  // namespace crlsc
