#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "crlsc/augment.hpp"
#include "crlsc/dataset.hpp"
#include "crlsc/dcl.hpp"
#include "crlsc/fusion.hpp"
#include "crlsc/knowledge_base.hpp"
#include "crlsc/mlp.hpp"

namespace crlsc {

struct TrainConfig {
    double tau = 0.1;
    double lr = 0.005;
    std::size_t epochs = 50;
    std::size_t batch = 256;
    AdamConfig adam;
    double lr_floor = 0.0;
    NegativesPolicy negatives = NegativesPolicy::OtherPositives;
    bool grad_through_fusion = true;   // gradient flows into Eq.-style scores via q
    bool stop_grad_qstar = false;      // ablation: anchor treated as constant
    bool normalize_embeddings = true;
    bool fusion_enabled = true;        // false = never-guided baseline
    double retrieval_scale = 1.0;      // multiplies the raw retrieval query
    FusionMode fusion_mode = FusionMode::Softmax;
    std::size_t top_n = 30;
    NoiseConfig noise;
    std::vector<std::size_t> hidden_dims = {128};
    std::size_t embed_dim = 64;
    std::uint64_t seed = 0;

    void validate() const {
        if (tau <= 0.0) throw ValidationError("TrainConfig: tau must be positive");
        if (batch < 2) throw ValidationError("TrainConfig: batch must be >= 2");
        noise.validate();
    }
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct Stage1Result {
    Mlp encoder;
    std::vector<EpochMetrics> metrics;
};

namespace detail {

// Backprop through q* = fuse(score(q, v), v) to q. Retrieved vectors are
// constants; only the score path carries gradient.
inline Matrix fusion_backward_to_q(const Matrix& d_qstar, const FusionResult& fr,
                                   FusionMode mode, std::size_t d) {
    const std::size_t B = d_qstar.rows();
    const std::size_t n = fr.scores.cols();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix d_q(B, d);
    for (std::size_t b = 0; b < B; ++b) {
        const Matrix& v = fr.retrieved.vectors[b];
        std::vector<double> d_s(n, 0.0);
        if (mode == FusionMode::Literal) {
            for (std::size_t i = 0; i < n; ++i)
                d_s[i] = dot(d_qstar.row(b), v.row(i), d);
        } else {
            const std::vector<double> w = softmax(fr.scores.row(b), n);
            std::vector<double> d_w(n);
            double wd = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                d_w[i] = dot(d_qstar.row(b), v.row(i), d);
                wd += w[i] * d_w[i];
            }
            for (std::size_t i = 0; i < n; ++i) d_s[i] = w[i] * (d_w[i] - wd);
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) d_q(b, c) += d_s[i] * v(i, c) * scale;
    }
    return d_q;
}

// Row-wise L2 normalization with a backward pass, used on q* before the loss.
struct RowNormCache {
    Matrix out;
    std::vector<double> norms;
};

inline RowNormCache rows_normalized(const Matrix& m) {
    RowNormCache c;
    c.out = m;
    c.norms.resize(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double nrm = norm2(m.row(r), m.cols());
        c.norms[r] = nrm;
        if (nrm > 0.0)
            for (std::size_t cc = 0; cc < m.cols(); ++cc) c.out(r, cc) /= nrm;
    }
    return c;
}

inline Matrix rows_normalized_backward(const RowNormCache& cache, const Matrix& g) {
    Matrix out = g;
    for (std::size_t r = 0; r < g.rows(); ++r) {
        const double nrm = cache.norms[r];
        if (nrm <= 0.0) continue;
        const double gy = dot(g.row(r), cache.out.row(r), g.cols());
        for (std::size_t c = 0; c < g.cols(); ++c)
            out(r, c) = (g(r, c) - gy * cache.out(r, c)) / nrm;
    }
    return out;
}

inline Matrix images_to_batch(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Matrix batch(idx.size(), ds.images[0].size());
    for (std::size_t i = 0; i < idx.size(); ++i) batch.set_row(i, ds.images[idx[i]].px);
    return batch;
}

}  // namespace detail

// Stage-1 pre-training: two augmented views per sample, view A enriched by
// KB retrieval into q*, view B encoded directly to p, DCL loss between them.
// query == nullptr runs the never-guided baseline (anchor = q).
inline Stage1Result train_stage1(const Dataset& dataset, const QueryFn* query,
                                 const TrainConfig& cfg, const AugmentationConfig& aug) {
    cfg.validate();
    aug.validate();
    if (dataset.size() < cfg.batch && dataset.size() < 2)
        throw ValidationError("train_stage1: dataset too small");

    const std::size_t in_dim = dataset.images[0].size();
    std::vector<std::size_t> dims = {in_dim};
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    dims.push_back(cfg.embed_dim);

    Stage1Result res;
    res.encoder = make_mlp(dims, Activation::Relu, cfg.normalize_embeddings, cfg.seed);
    AdamState adam(res.encoder, cfg.adam);

    const bool use_fusion = cfg.fusion_enabled && query != nullptr;

    Rng shuffle_rng(cfg.seed ^ 0xA5A5A5A5ULL);
    Rng aug_rng(cfg.seed ^ 0x5C5C5C5CULL);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    std::uint64_t batch_counter = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const double lr = cosine_annealed_lr(cfg.lr, cfg.lr_floor, epoch, cfg.epochs);

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start + 2 <= dataset.size(); start += cfg.batch) {
            const std::size_t bsz = std::min(cfg.batch, dataset.size() - start);
            if (bsz < 2) break;
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(start + bsz));

            Matrix view_a(bsz, in_dim), view_b(bsz, in_dim);
            for (std::size_t i = 0; i < bsz; ++i) {
                view_a.set_row(i, augment(dataset.images[idx[i]], aug, aug_rng).px);
                view_b.set_row(i, augment(dataset.images[idx[i]], aug, aug_rng).px);
            }

            ForwardCache cache_a = mlp_forward(res.encoder, view_a);
            ForwardCache cache_b = mlp_forward(res.encoder, view_b);
            const Matrix& q = cache_a.out;
            const Matrix& p = cache_b.out;

            FusionResult fr;
            detail::RowNormCache qstar_norm;
            Matrix anchors;
            if (use_fusion) {
                NoiseConfig noise = cfg.noise;
                noise.seed = cfg.noise.seed + batch_counter;
                // retrieve with the raw (unnormalized) embedding: its norm
                // grows with training, keeping the fixed-variance perturbation
                // proportionate the way it is for full-scale embeddings
                Matrix retrieval_q = cache_a.raw_out;
                for (double& x : retrieval_q.data()) x *= cfg.retrieval_scale;
                fr = retrieve_and_fuse(q, *query, cfg.top_n, noise, cfg.fusion_mode,
                                       false, &retrieval_q);
                if (cfg.normalize_embeddings) {
                    qstar_norm = detail::rows_normalized(fr.q_star);
                    anchors = qstar_norm.out;
                } else {
                    anchors = fr.q_star;
                }
            } else {
                anchors = q;
            }

            DclResult dcl = dcl_loss(anchors, p, cfg.tau, cfg.negatives);
            if (!std::isfinite(dcl.loss))
                throw NumericError("train_stage1: non-finite loss at epoch " +
                                   std::to_string(epoch) + " batch " +
                                   std::to_string(n_batches));
            epoch_loss += dcl.loss;
            ++n_batches;
            ++batch_counter;

            DclGrads dg = dcl_loss_backward(dcl.cache);
            MlpGrads grads = mlp_backward(res.encoder, cache_b, dg.d_positives);

            if (!cfg.stop_grad_qstar) {
                if (use_fusion) {
                    if (cfg.grad_through_fusion) {
                        Matrix d_qstar = cfg.normalize_embeddings
                                             ? detail::rows_normalized_backward(qstar_norm,
                                                                                 dg.d_anchors)
                                             : dg.d_anchors;
                        Matrix d_q = detail::fusion_backward_to_q(d_qstar, fr,
                                                                  cfg.fusion_mode, q.cols());
                        grads.accumulate(mlp_backward(res.encoder, cache_a, d_q));
                    }
                } else {
                    grads.accumulate(mlp_backward(res.encoder, cache_a, dg.d_anchors));
                }
            }

            adam.step(res.encoder, grads, lr);
        }

        res.metrics.push_back(
            {epoch + 1, n_batches ? epoch_loss / static_cast<double>(n_batches) : 0.0, lr});
    }
    return res;
}

inline Stage1Result train_stage1(const Dataset& dataset, const KnowledgeBase& skb,
                                 const TrainConfig& cfg, const AugmentationConfig& aug) {
    QueryFn q = local_query_fn(skb);
    return train_stage1(dataset, &q, cfg, aug);
}

// ---------------------------------------------------------------------------
// Linear probe on frozen embeddings.
// ---------------------------------------------------------------------------

struct ProbeConfig {
    std::size_t epochs = 100;
    double lr = 0.003;
    std::size_t batch = 32;
    std::size_t hidden = 64;
    bool mlp_head = true;  // false = single linear layer
    std::uint64_t seed = 0;
};

struct ProbeResult {
    double top1 = 0.0;
    double top5 = 0.0;
};

inline Matrix encode_dataset(const Mlp& encoder, const Dataset& ds) {
    Matrix batch(ds.size(), ds.images[0].size());
    for (std::size_t i = 0; i < ds.size(); ++i) batch.set_row(i, ds.images[i].px);
    return mlp_forward(encoder, batch).out;
}

// Train a classification head (3-layer MLP by default) on frozen embeddings
// with softmax cross-entropy; report top-1/top-5 on the held-out set.
inline ProbeResult linear_probe_eval(const Mlp& encoder, const Dataset& train_set,
                                     const Dataset& test_set, const ProbeConfig& cfg) {
    const std::size_t C = train_set.classes;
    if (C < 2) throw ValidationError("linear_probe_eval: need C >= 2");
    for (std::int32_t l : train_set.labels)
        if (l < 0 || static_cast<std::size_t>(l) >= C)
            throw ValidationError("linear_probe_eval: label out of range");

    const Matrix train_emb = encode_dataset(encoder, train_set);
    const Matrix test_emb = encode_dataset(encoder, test_set);
    const std::size_t d = train_emb.cols();

    std::vector<std::size_t> dims =
        cfg.mlp_head ? std::vector<std::size_t>{d, cfg.hidden, cfg.hidden, C}
                     : std::vector<std::size_t>{d, C};
    Mlp head = make_mlp(dims, Activation::Relu, false, cfg.seed);
    AdamState adam(head, {cfg.lr, 0.9, 0.999, 1e-8});

    Rng shuffle_rng(cfg.seed ^ 0x777777ULL);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < train_set.size(); start += cfg.batch) {
            const std::size_t bsz = std::min(cfg.batch, train_set.size() - start);
            Matrix batch(bsz, d);
            for (std::size_t i = 0; i < bsz; ++i)
                batch.set_row(i, train_emb.row_vec(order[start + i]));

            ForwardCache cache = mlp_forward(head, batch);
            Matrix grad(bsz, C);
            for (std::size_t i = 0; i < bsz; ++i) {
                const std::vector<double> probs = softmax(cache.out.row(i), C);
                const auto label =
                    static_cast<std::size_t>(train_set.labels[order[start + i]]);
                for (std::size_t c = 0; c < C; ++c)
                    grad(i, c) = (probs[c] - (c == label ? 1.0 : 0.0)) /
                                 static_cast<double>(bsz);
            }
            MlpGrads grads = mlp_backward(head, cache, grad);
            adam.step(head, grads, cfg.lr);
        }
    }

    const Matrix logits = mlp_forward(head, test_emb).out;
    std::size_t hit1 = 0, hit5 = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        std::vector<std::size_t> rank(C);
        std::iota(rank.begin(), rank.end(), 0);
        std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
            return logits(i, a) > logits(i, b);
        });
        const auto label = static_cast<std::size_t>(test_set.labels[i]);
        if (rank[0] == label) ++hit1;
        for (std::size_t k = 0; k < std::min<std::size_t>(5, C); ++k)
            if (rank[k] == label) {
                ++hit5;
                break;
            }
    }
    const double n = static_cast<double>(test_set.size());
    return {static_cast<double>(hit1) / n, static_cast<double>(hit5) / n};
}

// Encode every sample with the trained local encoder and pack the result
// into a PQ store tagged "pkb:<tag>".
inline KnowledgeBase build_private_kb(const Mlp& encoder, const Dataset& dataset,
                                      PQConfig pq_cfg, const std::string& tag) {
    const Matrix emb = encode_dataset(encoder, dataset);
    pq_cfg.d = emb.cols();
    std::vector<std::uint64_t> ids(dataset.size());
    std::iota(ids.begin(), ids.end(), 0);
    return kb_build(emb, pq_cfg, ids, "pkb:" + tag, dataset.labels);
}

}  // namespace crlsc
