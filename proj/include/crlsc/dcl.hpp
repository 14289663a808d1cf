#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "crlsc/matrix.hpp"

namespace crlsc {

enum class NegativesPolicy {
    OtherPositives,  // Neg(i) = {positives_j : j != i}, K = B-1
    Extended,        // additionally the other anchors, K = 2(B-1)
};

// Single-anchor decoupled loss: -log( e^{pos/tau} / sum_j e^{neg_j/tau} ).
// The positive is absent from the denominator.
inline double dcl_anchor_loss(double pos_sim, const std::vector<double>& neg_sims,
                              double tau) {
    if (tau <= 0.0) throw ValidationError("dcl: tau must be positive");
    if (neg_sims.empty()) throw ValidationError("dcl: no negatives");
    double mx = neg_sims[0] / tau;
    for (double s : neg_sims) mx = std::max(mx, s / tau);
    double sum = 0.0;
    for (double s : neg_sims) sum += std::exp(s / tau - mx);
    return -pos_sim / tau + mx + std::log(sum);
}

struct DclCache {
    Matrix anchors;    // B x d
    Matrix positives;  // B x d
    double tau = 0.1;
    NegativesPolicy policy = NegativesPolicy::OtherPositives;
    Matrix sim_ap;  // anchors . positives^T
    Matrix sim_aa;  // anchors . anchors^T   (Extended only)
    Matrix sim_pp;  // positives . positives^T (Extended only)
};

struct DclResult {
    double loss = 0.0;
    std::vector<double> per_sample;
    Matrix sim;  // anchor-positive dot products, B x B
    DclCache cache;
};

// Symmetrized DCL loss over a batch: the anchor->positive direction uses the
// other positives as negatives, the swapped direction uses the other
// anchors; totals are averaged.
inline DclResult dcl_loss(const Matrix& anchors, const Matrix& positives, double tau,
                          NegativesPolicy policy = NegativesPolicy::OtherPositives) {
    const std::size_t B = anchors.rows();
    if (B < 2) throw ValidationError("dcl_loss: need B >= 2 for negatives");
    if (tau <= 0.0) throw ValidationError("dcl_loss: tau must be positive");
    if (!anchors.same_shape(positives)) throw ValidationError("dcl_loss: shape mismatch");
    const std::size_t d = anchors.cols();

    DclResult res;
    res.cache.anchors = anchors;
    res.cache.positives = positives;
    res.cache.tau = tau;
    res.cache.policy = policy;

    Matrix& sap = res.cache.sim_ap;
    sap = Matrix(B, B);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < B; ++j)
            sap(i, j) = dot(anchors.row(i), positives.row(j), d);
    if (policy == NegativesPolicy::Extended) {
        res.cache.sim_aa = Matrix(B, B);
        res.cache.sim_pp = Matrix(B, B);
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < B; ++j) {
                res.cache.sim_aa(i, j) = dot(anchors.row(i), anchors.row(j), d);
                res.cache.sim_pp(i, j) = dot(positives.row(i), positives.row(j), d);
            }
    }

    res.per_sample.resize(B);
    double total = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        std::vector<double> negs_fwd, negs_swp;
        for (std::size_t j = 0; j < B; ++j) {
            if (j == i) continue;
            negs_fwd.push_back(sap(i, j));       // a_i vs p_j
            negs_swp.push_back(sap(j, i));       // p_i vs a_j
            if (policy == NegativesPolicy::Extended) {
                negs_fwd.push_back(res.cache.sim_aa(i, j));
                negs_swp.push_back(res.cache.sim_pp(i, j));
            }
        }
        const double l_fwd = dcl_anchor_loss(sap(i, i), negs_fwd, tau);
        const double l_swp = dcl_anchor_loss(sap(i, i), negs_swp, tau);
        res.per_sample[i] = 0.5 * (l_fwd + l_swp);
        total += res.per_sample[i];
    }
    res.loss = total / static_cast<double>(B);
    res.sim = sap;
    return res;
}

struct DclGrads {
    Matrix d_anchors;
    Matrix d_positives;
};

namespace detail {

// Softmax weights over {x_j/tau : j != i} for a row of similarities.
inline std::vector<double> excl_softmax(const Matrix& s, std::size_t i, double tau,
                                        bool row_major) {
    const std::size_t B = s.rows();
    std::vector<double> w(B, 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < B; ++j) {
        if (j == i) continue;
        mx = std::max(mx, (row_major ? s(i, j) : s(j, i)) / tau);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < B; ++j) {
        if (j == i) continue;
        w[j] = std::exp((row_major ? s(i, j) : s(j, i)) / tau - mx);
        sum += w[j];
    }
    for (double& x : w) x /= sum;
    return w;
}

}  // namespace detail

// Analytic gradient of dcl_loss w.r.t. anchors and positives.
inline DclGrads dcl_loss_backward(const DclCache& cache) {
    const Matrix& A = cache.anchors;
    const Matrix& P = cache.positives;
    const std::size_t B = A.rows();
    const std::size_t d = A.cols();
    const double tau = cache.tau;
    const double scale = 0.5 / (static_cast<double>(B) * tau);

    DclGrads g;
    g.d_anchors = Matrix(B, d);
    g.d_positives = Matrix(B, d);

    auto add = [&](Matrix& dst, std::size_t row, const Matrix& src, std::size_t src_row,
                   double coeff) {
        for (std::size_t c = 0; c < d; ++c) dst(row, c) += coeff * src(src_row, c);
    };

    if (cache.policy == NegativesPolicy::OtherPositives) {
        for (std::size_t i = 0; i < B; ++i) {
            // forward direction: anchor a_i, negatives p_{j != i}
            auto wf = detail::excl_softmax(cache.sim_ap, i, tau, true);
            // swapped: anchor p_i, negatives a_{j != i}
            auto ws = detail::excl_softmax(cache.sim_ap, i, tau, false);

            // positive term appears in both directions
            add(g.d_anchors, i, P, i, -2.0 * scale);
            add(g.d_positives, i, A, i, -2.0 * scale);

            for (std::size_t j = 0; j < B; ++j) {
                if (j == i) continue;
                // d/dS_ap(i,j) of forward logsumexp = wf[j]/tau
                add(g.d_anchors, i, P, j, scale * wf[j]);
                add(g.d_positives, j, A, i, scale * wf[j]);
                // swapped: S_ap(j,i) = a_j . p_i
                add(g.d_positives, i, A, j, scale * ws[j]);
                add(g.d_anchors, j, P, i, scale * ws[j]);
            }
        }
    } else {
        for (std::size_t i = 0; i < B; ++i) {
            // Forward: negatives {p_j} U {a_j}; combined softmax over both sets.
            std::vector<double> vals, tags;  // tag 0 -> sim_ap(i,j), 1 -> sim_aa(i,j)
            std::vector<std::size_t> idx;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < B; ++j) {
                if (j == i) continue;
                vals.push_back(cache.sim_ap(i, j) / tau); tags.push_back(0); idx.push_back(j);
                vals.push_back(cache.sim_aa(i, j) / tau); tags.push_back(1); idx.push_back(j);
            }
            for (double v : vals) mx = std::max(mx, v);
            double sum = 0.0;
            for (double& v : vals) { v = std::exp(v - mx); sum += v; }
            add(g.d_anchors, i, P, i, -scale);
            add(g.d_positives, i, A, i, -scale);
            for (std::size_t t = 0; t < vals.size(); ++t) {
                const double w = vals[t] / sum;
                const std::size_t j = idx[t];
                if (tags[t] == 0) {
                    add(g.d_anchors, i, P, j, scale * w);
                    add(g.d_positives, j, A, i, scale * w);
                } else {
                    add(g.d_anchors, i, A, j, scale * w);
                    add(g.d_anchors, j, A, i, scale * w);
                }
            }

            // Swapped: anchor p_i, negatives {a_j} U {p_j}.
            vals.clear(); tags.clear(); idx.clear();
            mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < B; ++j) {
                if (j == i) continue;
                vals.push_back(cache.sim_ap(j, i) / tau); tags.push_back(0); idx.push_back(j);
                vals.push_back(cache.sim_pp(i, j) / tau); tags.push_back(1); idx.push_back(j);
            }
            for (double v : vals) mx = std::max(mx, v);
            sum = 0.0;
            for (double& v : vals) { v = std::exp(v - mx); sum += v; }
            add(g.d_anchors, i, P, i, -scale);
            add(g.d_positives, i, A, i, -scale);
            for (std::size_t t = 0; t < vals.size(); ++t) {
                const double w = vals[t] / sum;
                const std::size_t j = idx[t];
                if (tags[t] == 0) {
                    add(g.d_positives, i, A, j, scale * w);
                    add(g.d_anchors, j, P, i, scale * w);
                } else {
                    add(g.d_positives, i, P, j, scale * w);
                    add(g.d_positives, j, P, i, scale * w);
                }
            }
        }
    }
    return g;
}

}  // namespace crlsc
